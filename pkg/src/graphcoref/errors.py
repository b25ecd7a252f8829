"""Exception types shared across the package."""


class DataError(ValueError):
    """Invalid input data: malformed files, inconsistent shapes, bad parameters."""


class TrainingDiverged(RuntimeError):
    """Training aborted because the loss or a gradient became non-finite."""

    def __init__(self, epoch: int, detail: str):
        super().__init__(f"training diverged at epoch {epoch}: {detail}")
        self.epoch = epoch
