EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_INPUT = 3


# LocalGspError is raised whenever an input violates a documented precondition. The CLI maps it to an exit code.
class LocalGspError(Exception):
    def __init__(self, message: str, exit_code: int = EXIT_INPUT):
        super().__init__(message)
        self.message = message
        self.exit_code = exit_code


class UsageError(LocalGspError):
    def __init__(self, message: str):
        super().__init__(message, exit_code=EXIT_USAGE)


class InputValidationError(LocalGspError):
    """
    Raised when an input file is missing, unreadable or malformed
    """
