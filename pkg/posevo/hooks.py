"""Optional callbacks invoked while an optimizer runs."""

import logging
import typing

from . import stats as _stats

logger = logging.getLogger(__name__)


class RunHooks:
    """Hooks for optimizer events.

    All callbacks are optional. A callback that raises never interrupts the
    run; the exception is logged at debug level.

    Attributes:
        on_generation: Called with each GenerationRecord as it is logged
        on_improvement: Called with (generation, new best value)
        should_continue: Called after each generation; returning False stops
                        the run early. If None, the run always continues.
    """

    def __init__(
        self,
        *,
        on_generation: typing.Callable[[_stats.GenerationRecord], None] | None = None,
        on_improvement: typing.Callable[[int, float], None] | None = None,
        should_continue: typing.Callable[[_stats.GenerationRecord], bool]
        | None = None,
    ) -> None:
        self.on_generation = on_generation
        self.on_improvement = on_improvement
        self.should_continue = should_continue

    def call_on_generation(self, record: _stats.GenerationRecord) -> None:
        if self.on_generation is not None:
            try:
                self.on_generation(record)
            except Exception:
                logger.debug("on_generation hook failed", exc_info=True)

    def call_on_improvement(self, generation: int, value: float) -> None:
        if self.on_improvement is not None:
            try:
                self.on_improvement(generation, value)
            except Exception:
                logger.debug("on_improvement hook failed", exc_info=True)

    def check_should_continue(self, record: _stats.GenerationRecord) -> bool:
        """Whether the run should go on; True if the hook is unset or fails."""
        if self.should_continue is None:
            return True
        try:
            return bool(self.should_continue(record))
        except Exception:
            logger.debug("should_continue hook failed", exc_info=True)
            return True
