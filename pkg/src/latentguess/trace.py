"""Attack traces: ordered (guess index, cumulative matches) curves."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class AttackTrace:
    mode: str  # "static" | "cpg" | "dpg"
    budget: int
    seed: int | None = None
    points: list[tuple[int, int]] = field(default_factory=list)

    def record(self, guess_index: int, matches: int) -> None:
        if self.points:
            last_gi, last_m = self.points[-1]
            if guess_index == last_gi:
                # same guess index logged twice (stride point + hit): keep one
                self.points[-1] = (guess_index, matches)
                return
            if guess_index < last_gi or matches < last_m:
                raise ValueError("trace must be monotone")
        self.points.append((guess_index, matches))

    @property
    def final_matches(self) -> int:
        return self.points[-1][1] if self.points else 0

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("guess_index,matches\n")
            for gi, m in self.points:
                f.write(f"{gi},{m}\n")
