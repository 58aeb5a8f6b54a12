"""Typed attribute vocabulary for offers and requirements.

Hard capacity attributes (cores, GPU, RAM, storage, network) and soft ones
(price, efficiency, jurisdiction, priority) describe offers; requirement
predicates are evaluated against them.  All boundary comparisons are
inclusive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .errors import ValidationError

EARTH_RADIUS_KM = 6371.0

Scalar = str | int | float | bool


class PerformanceClass(str, Enum):
    S = "S"
    M = "M"
    L = "L"
    XL = "XL"


class Jurisdiction(str, Enum):
    EU = "EU"
    US = "US"
    OTHER = "OTHER"


_CLASS_RANK = {
    PerformanceClass.S: 0,
    PerformanceClass.M: 1,
    PerformanceClass.L: 2,
    PerformanceClass.XL: 3,
}

# Sanity bounds tying class labels to core counts; catches fixture typos.
_CLASS_VCPU_MAX = {
    PerformanceClass.S: 2,
    PerformanceClass.M: 4,
    PerformanceClass.L: 8,
}
_XL_VCPU_MIN = 8


def class_rank(cls: PerformanceClass) -> int:
    return _CLASS_RANK[cls]


@dataclass(frozen=True)
class GeoPoint:
    latitude_deg: float
    longitude_deg: float
    label: str | None = None

    def __post_init__(self):
        if not -90.0 <= self.latitude_deg <= 90.0:
            raise ValidationError(f"latitudeDeg out of range: {self.latitude_deg}")
        if not -180.0 <= self.longitude_deg <= 180.0:
            raise ValidationError(f"longitudeDeg out of range: {self.longitude_deg}")

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "latitudeDeg": self.latitude_deg,
            "longitudeDeg": self.longitude_deg,
        }
        if self.label is not None:
            doc["label"] = self.label
        return doc

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "GeoPoint":
        try:
            return cls(
                latitude_deg=float(doc["latitudeDeg"]),
                longitude_deg=float(doc["longitudeDeg"]),
                label=doc.get("label"),
            )
        except KeyError as exc:
            raise ValidationError(f"GeoPoint missing field {exc.args[0]}") from None
        except (TypeError, ValueError):
            raise ValidationError("GeoPoint coordinates must be numbers") from None


@dataclass(frozen=True)
class AttributeSet:
    """Full attribute description of one offer."""

    performance_class: PerformanceClass
    vcpu: int
    gpu: bool
    ram_gib: float
    storage_gib: float
    network_mbps: float
    location: GeoPoint
    price_per_hour: float
    efficiency_score: float
    jurisdiction: Jurisdiction
    priority: int = 0
    extra: dict[str, Scalar] = field(default_factory=dict)

    def __post_init__(self):
        if self.vcpu < 0:
            raise ValidationError("vcpu must be >= 0")
        for name in ("ram_gib", "storage_gib", "network_mbps", "price_per_hour"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")
        if not 0.0 <= self.efficiency_score <= 1.0:
            raise ValidationError(f"efficiencyScore out of [0,1]: {self.efficiency_score}")
        if self.priority < 0:
            raise ValidationError("priority must be >= 0")
        cls = self.performance_class
        if cls is PerformanceClass.XL:
            if self.vcpu < _XL_VCPU_MIN:
                raise ValidationError(f"class XL requires vcpu >= {_XL_VCPU_MIN}, got {self.vcpu}")
        elif self.vcpu > _CLASS_VCPU_MAX[cls]:
            raise ValidationError(
                f"class {cls.value} allows vcpu <= {_CLASS_VCPU_MAX[cls]}, got {self.vcpu}"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "performanceClass": self.performance_class.value,
            "vcpu": self.vcpu,
            "gpu": self.gpu,
            "ramGiB": self.ram_gib,
            "storageGiB": self.storage_gib,
            "networkMbps": self.network_mbps,
            "location": self.location.to_dict(),
            "pricePerHour": self.price_per_hour,
            "efficiencyScore": self.efficiency_score,
            "jurisdiction": self.jurisdiction.value,
            "priority": self.priority,
            "extra": dict(self.extra),
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "AttributeSet":
        try:
            return cls(
                performance_class=PerformanceClass(doc["performanceClass"]),
                vcpu=int(doc["vcpu"]),
                gpu=bool(doc["gpu"]),
                ram_gib=float(doc["ramGiB"]),
                storage_gib=float(doc["storageGiB"]),
                network_mbps=float(doc["networkMbps"]),
                location=GeoPoint.from_dict(doc["location"]),
                price_per_hour=float(doc["pricePerHour"]),
                efficiency_score=float(doc["efficiencyScore"]),
                jurisdiction=Jurisdiction(doc["jurisdiction"]),
                priority=int(doc.get("priority", 0)),
                extra=dict(doc.get("extra", {})),
            )
        except KeyError as exc:
            raise ValidationError(f"AttributeSet missing field {exc.args[0]}") from None
        except ValueError as exc:
            raise ValidationError(f"AttributeSet field invalid: {exc}") from None


@dataclass(frozen=True)
class Requirement:
    """Constraints a requester places on an offer.

    Each present field must hold for an offer to match; absent fields do not
    constrain.  At least one constraint must be present.
    """

    target: str = "VirtualMachine"
    min_class: PerformanceClass | None = None
    near: tuple[GeoPoint, float] | None = None  # (point, radiusKm)
    max_price_per_hour: float | None = None
    min_efficiency: float | None = None
    jurisdiction: Jurisdiction | None = None
    needs_gpu: bool | None = None
    extra_constraints: dict[str, Scalar] = field(default_factory=dict)

    def __post_init__(self):
        if self.near is not None and self.near[1] <= 0:
            raise ValidationError(f"radiusKm must be > 0, got {self.near[1]}")
        if not self.constraint_count():
            raise ValidationError("requirement must carry at least one constraint")

    def constraint_count(self) -> int:
        present = [
            self.min_class is not None,
            self.near is not None,
            self.max_price_per_hour is not None,
            self.min_efficiency is not None,
            self.jurisdiction is not None,
            self.needs_gpu is not None,
        ]
        return sum(present) + len(self.extra_constraints)

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {"target": self.target}
        if self.min_class is not None:
            doc["minClass"] = self.min_class.value
        if self.near is not None:
            point, radius = self.near
            doc["near"] = {"point": point.to_dict(), "radiusKm": radius}
        if self.max_price_per_hour is not None:
            doc["maxPricePerHour"] = self.max_price_per_hour
        if self.min_efficiency is not None:
            doc["minEfficiency"] = self.min_efficiency
        if self.jurisdiction is not None:
            doc["jurisdiction"] = self.jurisdiction.value
        if self.needs_gpu is not None:
            doc["needsGpu"] = self.needs_gpu
        if self.extra_constraints:
            doc["extraConstraints"] = dict(self.extra_constraints)
        return doc

    @classmethod
    def from_dict(
        cls,
        doc: dict[str, Any],
        default_target: str | None = None,
        default_radius_km: float = 100.0,
    ) -> "Requirement":
        """Parse the wire shape; unknown fields are ignored for forward
        compatibility.  A `near` without radius gets `default_radius_km`."""
        try:
            near = None
            if doc.get("near") is not None:
                raw_near = doc["near"]
                point = GeoPoint.from_dict(raw_near.get("point", raw_near))
                radius = float(raw_near.get("radiusKm", default_radius_km))
                near = (point, radius)
            return cls(
                target=doc.get("target") or default_target or "VirtualMachine",
                min_class=(
                    PerformanceClass(doc["minClass"]) if doc.get("minClass") is not None else None
                ),
                near=near,
                max_price_per_hour=(
                    float(doc["maxPricePerHour"])
                    if doc.get("maxPricePerHour") is not None
                    else None
                ),
                min_efficiency=(
                    float(doc["minEfficiency"]) if doc.get("minEfficiency") is not None else None
                ),
                jurisdiction=(
                    Jurisdiction(doc["jurisdiction"])
                    if doc.get("jurisdiction") is not None
                    else None
                ),
                needs_gpu=bool(doc["needsGpu"]) if doc.get("needsGpu") is not None else None,
                extra_constraints=dict(doc.get("extraConstraints", {})),
            )
        except (TypeError, ValueError, AttributeError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"requirement invalid: {exc}") from None


def distance_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle (haversine) distance in kilometers."""
    phi_a = math.radians(a.latitude_deg)
    phi_b = math.radians(b.latitude_deg)
    d_phi = math.radians(b.latitude_deg - a.latitude_deg)
    d_lambda = math.radians(b.longitude_deg - a.longitude_deg)
    h = math.sin(d_phi / 2) ** 2 + math.cos(phi_a) * math.cos(phi_b) * math.sin(d_lambda / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.atan2(math.sqrt(h), math.sqrt(1 - h))


def matches(req: Requirement, attrs: AttributeSet) -> bool:
    """True iff every present constraint holds (inclusive boundaries)."""
    if req.min_class is not None and class_rank(attrs.performance_class) < class_rank(req.min_class):
        return False
    if req.near is not None:
        point, radius = req.near
        if distance_km(point, attrs.location) > radius:
            return False
    if req.max_price_per_hour is not None and attrs.price_per_hour > req.max_price_per_hour:
        return False
    if req.min_efficiency is not None and attrs.efficiency_score < req.min_efficiency:
        return False
    if req.jurisdiction is not None and attrs.jurisdiction is not req.jurisdiction:
        return False
    if req.needs_gpu and not attrs.gpu:
        return False
    for key, value in req.extra_constraints.items():
        if attrs.extra.get(key) != value:
            return False
    return True


def score(req: Requirement, attrs: AttributeSet, offer_id: str = "") -> tuple:
    """Ranking key for matching offers: cheap first, then efficient, then
    close (when `near` constrains), then offerId for a deterministic total
    order."""
    if req.near is not None:
        dist = distance_km(req.near[0], attrs.location)
    else:
        dist = 0.0
    return (attrs.price_per_hour, -attrs.efficiency_score, dist, offer_id)
