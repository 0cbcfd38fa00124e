from dataclasses import field


def ffield(default_factory):
    return field(default_factory=default_factory)


def parse_clock(text: str) -> int:
    """%H:%M:%S to seconds of the day, raises ValueError"""
    parts = text.strip().split(":")
    if len(parts) != 3 or not all(part.isdigit() for part in parts):
        raise ValueError(f"not a %H:%M:%S time: {text!r}")
    hours, minutes, seconds = (int(part) for part in parts)
    if not (0 <= hours < 24 and 0 <= minutes < 60 and 0 <= seconds < 60):
        raise ValueError(f"not a %H:%M:%S time: {text!r}")
    return hours * 3600 + minutes * 60 + seconds


def format_clock(seconds: int) -> str:
    """seconds (from the horizon start) to %H:%M:%S, days are dropped"""
    seconds = seconds % 86400
    return f"{seconds // 3600:02d}:{seconds % 3600 // 60:02d}:{seconds % 60:02d}"
