"""Error taxonomy shared across modules; each error carries a stable code."""


class ApplianceError(Exception):
    code = "internal"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ParseRejected(ApplianceError):
    code = "parse_error"

    def __init__(self, message: str, position: int = 0):
        super().__init__(message)
        self.position = position


class OversizedDocument(ApplianceError):
    code = "oversized"


class UnknownDoc(ApplianceError):
    code = "unknown_doc"


class UnknownVersion(ApplianceError):
    code = "unknown_version"


class NoLiveReplica(ApplianceError):
    code = "no_live_replica"


class UnknownView(ApplianceError):
    code = "unknown_view"


class DuplicateAnnotator(ApplianceError):
    code = "duplicate_annotator"


class UnknownPath(ApplianceError):
    code = "unknown_path"


class NoIndexForJoin(ApplianceError):
    code = "no_index"


class InvalidConfig(ApplianceError):
    code = "invalid_config"


class InvalidRequest(ApplianceError):
    code = "invalid_request"


class SchedulingError(ApplianceError):
    code = "scheduling_error"


class ScriptError(ApplianceError):
    code = "script_error"

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
