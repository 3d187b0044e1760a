"""Exception types shared across the package."""


class NumericsError(RuntimeError):
    """Raised when a computation produces non-finite or divergent values."""


class TrainingAborted(NumericsError):
    """Raised when the training loop stops on a non-finite loss or gradient."""

    def __init__(self, message: str, iteration: int, checkpoint_path=None):
        super().__init__(message)
        self.iteration = iteration
        self.checkpoint_path = checkpoint_path
