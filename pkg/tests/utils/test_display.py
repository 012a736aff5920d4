from desmil.utils.display import maybe_tqdm, text_histogram


def test_text_histogram():
    text = text_histogram([1, 0, 4], [0.0, 0.25, 0.5, 1.0], width=8)
    assert text.splitlines() == [
        "[0.00, 0.25)        1 ##",
        "[0.25, 0.50)        0 ",
        "[0.50, 1.00)        4 ########",
    ]


def test_text_histogram_empty_bins():
    assert text_histogram([0, 0], [0.0, 0.5, 1.0], width=4).splitlines()[0].endswith("0 ")


def test_maybe_tqdm_passthrough():
    items = [1, 2, 3]
    assert maybe_tqdm(items, verbose=False) is items
    assert list(maybe_tqdm(items, verbose=True)) == items
