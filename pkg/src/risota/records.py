"""Per-round log records and their JSON-friendly encoding."""

from dataclasses import asdict, dataclass, field, fields


@dataclass
class RoundLog:
    round: int
    beta_t: float
    target: int
    tau: list
    beta_mag: list
    clipped: list
    measured_power: list
    power_limit: list
    alpha: list
    ratio: list
    h_eff_mag: list = field(default_factory=list)
    power_criterion: list = field(default_factory=list)
    sca_f1_init: float = None
    sca_f1_final: float = None
    sca_iterations: int = 0
    target_feasible_re: bool = None
    target_feasible_abs: bool = None
    accuracy: float = None
    loss: float = None
    misalignment: float = 0.0
    alignment_error: float = 0.0
    h_ub_min: float = None
    h_ur_max: float = None
    h_rb_max: float = None

    def to_dict(self):
        d = asdict(self)
        d["ratio"] = [[z.real, z.imag] for z in self.ratio]
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        kwargs = {k: v for k, v in d.items() if k in names}
        if "ratio" in kwargs:
            kwargs["ratio"] = [complex(*z) if isinstance(z, (list, tuple)) else complex(z)
                               for z in kwargs["ratio"]]
        return cls(**kwargs)
