class TicketQueue:
    """First-in first-out ticket queue."""

    def __init__(self) -> None:
        self._items = []

    def push(self, priority: int) -> None:
        self._items.append(priority)

    def pop(self) -> int:
        return self._items.pop(0)

    def __len__(self):
        return len(self._items)
