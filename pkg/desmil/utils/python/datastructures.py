from dataclasses import replace
from typing import Sequence


def chunk_list(ls: Sequence, size: int) -> list:
    """Split a sequence into consecutive chunks of `size` (last chunk may be shorter)."""
    assert size >= 1
    return [ls[i : i + size] for i in range(0, len(ls), size)]


class ExtendedDataClassMixin:
    @classmethod
    def get_fields(cls):
        # noinspection PyUnresolvedReferences
        return list(cls.__dataclass_fields__)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.get_fields()}

    @classmethod
    def from_dict(cls, kwargs):
        # noinspection PyArgumentList
        return cls(**kwargs)

    def new(self, **new_kwargs):
        # noinspection PyDataclass
        return replace(self, **new_kwargs)
