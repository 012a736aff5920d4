from typing import Optional


def parse_csv_list(string: Optional[str], cast=str) -> Optional[list]:
    """Parses a comma-separated command line value such as "0.01,0.1,1" into a typed list."""
    if string is None:
        return None
    return [cast(part.strip()) for part in string.split(",") if part.strip()]
