import logging
from typing import List

logger = logging.getLogger("preguss")

WIDTHS = (8, 16, 32)


def validate_width(value: int) -> int:
    if value not in WIDTHS:
        raise ValueError(f"width must be one of {', '.join(map(str, WIDTHS))}, got {value}")
    return value


def validate_verdict_order(queued: List[str], verdicts: List[str], complete: bool) -> None:
    """Verdicts follow the queue: all of it for a finished run, a prefix when the run stopped."""
    if verdicts != queued[:len(verdicts)]:
        raise ValueError("verdicts are not in queue order")
    if complete and len(verdicts) != len(queued):
        logger.error(f"Report lists {len(verdicts)} verdicts for {len(queued)} queued assertions")
        raise ValueError(f"{len(queued) - len(verdicts)} queued assertions have no verdict")
