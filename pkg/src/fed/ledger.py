"""Simulated message passing and exact communication accounting.

Every transfer between the server and a client is recorded with its payload
length in scalar parameters. Only parameter vectors are ever recorded; there
is no field for examples or labels.
"""

from dataclasses import dataclass, field
from typing import Any

DOWN = "down"
UP = "up"


@dataclass(frozen=True)
class Message:
    round: int
    direction: str
    client_id: int
    payload: int

    def to_record(self) -> dict[str, Any]:
        return {
            "round": self.round,
            "direction": self.direction,
            "client_id": self.client_id,
            "payload": self.payload,
        }


@dataclass
class CommunicationLedger:
    messages: list[Message] = field(default_factory=list)

    def send(self, round_index: int, direction: str, client_id: int, payload: int) -> None:
        if direction not in (DOWN, UP):
            raise ValueError(f"direction must be '{DOWN}' or '{UP}', got '{direction}'")
        if payload < 0:
            raise ValueError(f"payload must be nonnegative, got {payload}")
        self.messages.append(Message(round_index, direction, client_id, payload))

    def sent(self, direction: str, round_index: int | None = None) -> int:
        return sum(
            m.payload
            for m in self.messages
            if m.direction == direction and (round_index is None or m.round == round_index)
        )

    def round_total(self, round_index: int) -> int:
        return self.sent(DOWN, round_index) + self.sent(UP, round_index)

    @property
    def total(self) -> int:
        return sum(m.payload for m in self.messages)


def communication_cost(payload: int, clients_per_round: int, rounds: int) -> tuple[int, int]:
    """(per-round, overall) parameters sent when each selected client receives
    and returns one payload per round."""
    for name, value in (("payload", payload), ("clients_per_round", clients_per_round)):
        if value <= 0:
            raise ValueError(f"{name} must be positive, got {value}")
    if rounds < 0:
        raise ValueError(f"rounds must be nonnegative, got {rounds}")
    per_round = 2 * clients_per_round * payload
    return per_round, per_round * rounds
