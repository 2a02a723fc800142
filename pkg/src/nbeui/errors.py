"""Error taxonomy shared across the engine.

Every error the engine can surface to a client maps to exactly one class
here; the class name doubles as the wire-level error kind.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all engine errors."""

    @property
    def kind(self) -> str:
        return type(self).__name__


# --- notebook model ---

class UnknownCell(EngineError):
    pass


class UnknownSession(EngineError):
    pass


class NotAPromptCell(EngineError):
    pass


class NotExecutable(EngineError):
    pass


class MalformedNotebook(EngineError):
    """Interchange file rejected; message carries a location diagnostic."""


# --- llm gateway ---

class BackendUnavailable(EngineError):
    pass


class ReplayMiss(EngineError):
    """No recorded response; message names the missing fingerprint."""

    def __init__(self, agent_id: str, fingerprint: str):
        super().__init__(f"no recorded response for {agent_id} fingerprint {fingerprint}")
        self.agent_id = agent_id
        self.fingerprint = fingerprint


class StubMiss(EngineError):
    pass


# --- agent pipeline ---
# PipelineError subclasses are the only error kinds the pipeline lets escape.

class PipelineError(EngineError):
    pass


class EmptyRequest(PipelineError):
    pass


class EmptyAdvice(PipelineError):
    pass


class EmptyPlan(PipelineError):
    pass


class MalformedPlan(PipelineError):
    pass


class CompileFailure(PipelineError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class EmptyGeneration(PipelineError):
    pass


class EmptySuggestion(PipelineError):
    pass


class KernelError(PipelineError):
    """Kernel-side failure surfaced through the pipeline."""


# --- kernel executor ---

class SpawnFailure(EngineError):
    pass


class KernelTimeout(EngineError):
    pass


class KernelDead(EngineError):
    pass


class UnknownGlobal(EngineError):
    pass


class UnrepresentableValue(EngineError):
    pass


# --- widget runtime ---

class ManifestMismatch(EngineError):
    pass


class UnknownElement(EngineError):
    pass


class ValueOutOfDomain(EngineError):
    pass


class StaleEvent(EngineError):
    pass


class StalePanel(EngineError):
    pass
