def flag_count(p: bool) -> int:
    return p
