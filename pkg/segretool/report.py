# <pep8 compliant>


class Report:
    """Collects the messages of a verification run instead of raising on the first failure."""

    def __init__(self, name: str = ""):
        self.name = name
        self.messages: list[tuple[str, str]] = []

    def report(self, kind: str, message: str):
        """Record a message; ``kind`` is one of INFO, PASS, FAIL."""
        self.messages.append((kind, message))

    def check(self, label: str, passed: bool, detail: str = "") -> bool:
        text = f"{label}: {detail}" if detail else label
        self.report("PASS" if passed else "FAIL", text)
        return passed

    @property
    def failures(self) -> list[str]:
        return [message for kind, message in self.messages if kind == "FAIL"]

    @property
    def passed(self) -> bool:
        return not self.failures

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "messages": [{"kind": kind, "message": message} for kind, message in self.messages],
        }
