class Rect:
    def __init__(self) -> None:
        self.width = 1.0
        self.height = 1.0

    def resize(self, width: float, height: float) -> None:
        if width < 0 or height < 0:
            raise ValueError("negative size")
        self.width = float(width)
        self.height = float(height)

    def scale(self, factor: float) -> None:
        self.width *= factor
        self.height *= factor

    def area(self) -> float:
        return self.width * self.height
