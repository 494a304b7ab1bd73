"""Exception hierarchy; each class carries the CLI exit code it maps to."""


class PipelineError(Exception):
    exit_code = 4


class ConfigError(PipelineError):
    exit_code = 2


class SchemaError(PipelineError):
    exit_code = 2


class DataError(PipelineError):
    exit_code = 3
