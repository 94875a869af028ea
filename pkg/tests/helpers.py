"""Shared test doubles."""

from __future__ import annotations

from commentary_engine.gateway import CompletionRequest, _TransientFailure


class ScriptedProvider:
    """Replays a fixed sequence of responses; entries may be exceptions."""

    name = "scripted"

    def __init__(self, responses: list):
        self._responses = list(responses)
        self.calls: list[CompletionRequest] = []

    def complete(self, request: CompletionRequest) -> tuple[str, dict[str, int]]:
        self.calls.append(request)
        if not self._responses:
            raise AssertionError("ScriptedProvider ran out of responses")
        item = self._responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item, {"prompt": 1, "completion": 1}


def transient(status: int = 500, body: str = "boom", timeout: bool = False) -> _TransientFailure:
    return _TransientFailure(status, body, timeout=timeout)


class AlwaysFailingProvider:
    name = "failing"

    def __init__(self, timeout: bool = False):
        self.calls = 0
        self.timeout = timeout

    def complete(self, request: CompletionRequest) -> tuple[str, dict[str, int]]:
        self.calls += 1
        raise _TransientFailure(503, "unavailable", timeout=self.timeout)
