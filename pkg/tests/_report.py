"""Collects one PASS/FAIL line per acceptance criterion for the session summary."""

RESULTS: dict[int, str] = {}


def record(number: int, title: str, ok: bool, detail: str, seconds: float) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail} ({seconds:.1f} s)"
    RESULTS[number] = line
    print(line)
