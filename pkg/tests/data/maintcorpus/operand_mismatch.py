def diff(a: int, b: str) -> int:
    return a - b
