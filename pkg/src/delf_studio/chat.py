"""Chat message and conversation value types shared by the prompt engine and the gateway."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Role(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    content: str


class ConversationError(ValueError):
    """The message sequence violates the conversation shape."""


@dataclass(frozen=True)
class Conversation:
    """An ordered chat history.

    Shape: nonempty; at most one leading system message; after it, roles
    strictly alternate user/assistant starting with user.
    """

    messages: tuple[ChatMessage, ...]

    def __post_init__(self) -> None:
        if not self.messages:
            raise ConversationError("conversation must contain at least one message")
        rest = list(self.messages)
        if rest[0].role is Role.SYSTEM:
            rest = rest[1:]
            if not rest:
                raise ConversationError("a lone system message is not a conversation opener")
        expected = Role.USER
        for i, msg in enumerate(rest):
            if msg.role is not expected:
                raise ConversationError(
                    f"message {i + (len(self.messages) - len(rest))} has role "
                    f"{msg.role.value!r}, expected {expected.value!r}"
                )
            expected = Role.ASSISTANT if expected is Role.USER else Role.USER

    def append(self, message: ChatMessage) -> "Conversation":
        return Conversation(self.messages + (message,))

    def role_content_pairs(self) -> list[tuple[str, str]]:
        return [(m.role.value, m.content) for m in self.messages]


def conversation(*pairs: tuple[str, str]) -> Conversation:
    """Build a conversation from (role, content) pairs."""
    return Conversation(tuple(ChatMessage(Role(r), c) for r, c in pairs))
