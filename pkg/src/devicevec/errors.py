"""Exceptions shared across modules."""


class DimensionMismatch(ValueError):
    pass


class UnknownToken(KeyError):
    def __str__(self):
        return f"unknown token {self.args[0]!r}"
