"""
Modelos dos arquivos persistidos pelo tuner: dataset por laço e arquivo do próximo parâmetro.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any
import math

from App.utils.bo import reparam
from App.utils.constants import DATASET_FORMAT_VERSION
from App.utils.exceptions import DatasetValidationError, UnsupportedVersionError


@dataclass
class MeasurementEntry:
    """Tempo τ_ℓ de uma execução ℓ do laço."""

    ell: int
    tau_s: float

    def to_dict(self) -> dict:
        return {"ell": self.ell, "tau_s": self.tau_s}


@dataclass
class IterationRecord:
    """Uma iteração do BO: parâmetro avaliado e as medições das L execuções."""

    run_uuid: str
    x: float
    theta: float
    measurements: list[MeasurementEntry]
    total_s: float

    @classmethod
    def from_measurements(cls, run_uuid: str, x: float, measurements: list[tuple[int, float]]) -> "IterationRecord":
        entries = [MeasurementEntry(int(ell), float(tau)) for ell, tau in measurements]
        return cls(
            run_uuid=run_uuid,
            x=float(x),
            theta=reparam(x),
            measurements=entries,
            total_s=math.fsum(e.tau_s for e in entries),
        )

    def to_dict(self) -> dict:
        return {
            "run_uuid": self.run_uuid,
            "x": self.x,
            "theta": self.theta,
            "measurements": [m.to_dict() for m in self.measurements],
            "total_s": self.total_s,
        }


@dataclass
class LoopDatasetFile:
    """Dataset D_t de um laço, persistido como `<loop_id>.json`."""

    loop_id: str
    n_tasks: int | None = None
    config: dict = field(default_factory=dict)
    iterations: list[IterationRecord] = field(default_factory=list)
    version: int = DATASET_FORMAT_VERSION

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "loop_id": self.loop_id,
            "N": self.n_tasks,
            "config": self.config,
            "iterations": [it.to_dict() for it in self.iterations],
        }

    @classmethod
    def from_dict(cls, payload: Any) -> "LoopDatasetFile":
        """
        Constrói o dataset a partir do JSON já decodificado.

        Raises:
            UnsupportedVersionError: versão diferente da suportada.
            DatasetValidationError: qualquer outra violação de schema.
        """
        if isinstance(payload, dict) and "version" in payload and payload["version"] != DATASET_FORMAT_VERSION:
            raise UnsupportedVersionError(
                f"Versão de dataset não suportada: {payload['version']!r} (suportada: {DATASET_FORMAT_VERSION})"
            )
        valid, reason = validate_dataset_payload(payload)
        if not valid:
            raise DatasetValidationError(reason)

        iterations = [
            IterationRecord(
                run_uuid=it["run_uuid"],
                x=float(it["x"]),
                theta=float(it["theta"]),
                measurements=[MeasurementEntry(int(m["ell"]), float(m["tau_s"])) for m in it["measurements"]],
                total_s=float(it["total_s"]),
            )
            for it in payload["iterations"]
        ]
        n_tasks = payload.get("N")
        return cls(
            loop_id=payload["loop_id"],
            n_tasks=int(n_tasks) if n_tasks is not None else None,
            config=dict(payload.get("config") or {}),
            iterations=iterations,
            version=payload["version"],
        )


@dataclass
class NextParamFile:
    """Parâmetro sugerido para a próxima execução (`<loop_id>.next.json`)."""

    loop_id: str
    x_next: float
    theta_next: float
    produced_by: str
    source_iteration_count: int

    def to_dict(self) -> dict:
        return {
            "loop_id": self.loop_id,
            "x_next": self.x_next,
            "theta_next": self.theta_next,
            "produced_by": self.produced_by,
            "source_iteration_count": self.source_iteration_count,
        }

    @classmethod
    def from_dict(cls, payload: Any) -> "NextParamFile":
        if not isinstance(payload, dict):
            raise DatasetValidationError("arquivo de próximo parâmetro deve ser um objeto JSON")
        for key in ("loop_id", "x_next", "theta_next", "produced_by", "source_iteration_count"):
            if key not in payload:
                raise DatasetValidationError(f"campo obrigatório ausente: '{key}'")
        x_next = payload["x_next"]
        if not _is_number(x_next) or not 0.0 < x_next < 1.0:
            raise DatasetValidationError(f"campo 'x_next' fora de (0, 1): {x_next!r}")
        if not _is_number(payload["theta_next"]) or not math.isclose(payload["theta_next"], reparam(x_next), rel_tol=1e-9):
            raise DatasetValidationError("campo 'theta_next' inconsistente com reparam(x_next)")
        return cls(
            loop_id=str(payload["loop_id"]),
            x_next=float(x_next),
            theta_next=float(payload["theta_next"]),
            produced_by=str(payload["produced_by"]),
            source_iteration_count=int(payload["source_iteration_count"]),
        )


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def validate_iteration_payload(index: int, it: Any) -> tuple[bool, str]:
    """
    Valida um registro de iteração.

    Returns:
        Tupla (é_válido, motivo_se_inválido)
    """
    where = f"iterations[{index}]"
    if not isinstance(it, dict):
        return False, f"{where} deve ser um objeto"
    for key in ("run_uuid", "x", "theta", "measurements", "total_s"):
        if key not in it:
            return False, f"campo obrigatório ausente: '{where}.{key}'"
    if not isinstance(it["run_uuid"], str) or not it["run_uuid"]:
        return False, f"campo '{where}.run_uuid' deve ser uma string não vazia"
    x = it["x"]
    if not _is_number(x) or not 0.0 < x < 1.0:
        return False, f"campo '{where}.x' fora de (0, 1): {x!r}"
    if not _is_number(it["theta"]) or not math.isclose(it["theta"], reparam(x), rel_tol=1e-9, abs_tol=1e-12):
        return False, f"campo '{where}.theta' inconsistente com reparam(x)"
    measurements = it["measurements"]
    if not isinstance(measurements, list) or not measurements:
        return False, f"campo '{where}.measurements' deve ser uma lista não vazia"
    last_ell = 0
    for j, m in enumerate(measurements):
        if not isinstance(m, dict) or "ell" not in m or "tau_s" not in m:
            return False, f"campo '{where}.measurements[{j}]' deve ter 'ell' e 'tau_s'"
        ell, tau = m["ell"], m["tau_s"]
        if isinstance(ell, bool) or not isinstance(ell, int) or ell <= last_ell:
            return False, f"campo '{where}.measurements[{j}].ell' deve ser inteiro crescente >= 1"
        if not _is_number(tau) or tau <= 0:
            return False, f"campo '{where}.measurements[{j}].tau_s' deve ser > 0"
        last_ell = ell
    total = it["total_s"]
    expected = math.fsum(m["tau_s"] for m in measurements)
    if not _is_number(total) or not math.isclose(total, expected, rel_tol=1e-9, abs_tol=1e-9):
        return False, f"campo '{where}.total_s' difere da soma de tau_s ({total!r} != {expected!r})"
    return True, ""


def validate_dataset_payload(payload: Any) -> tuple[bool, str]:
    """
    Valida o JSON decodificado de um LoopDatasetFile.

    Returns:
        Tupla (é_válido, motivo_se_inválido); o motivo nomeia o campo.
    """
    if not isinstance(payload, dict):
        return False, "dataset deve ser um objeto JSON"
    if "version" not in payload:
        return False, "campo obrigatório ausente: 'version'"
    if payload["version"] != DATASET_FORMAT_VERSION:
        return False, f"campo 'version' não suportado: {payload['version']!r}"
    if not isinstance(payload.get("loop_id"), str) or not payload["loop_id"]:
        return False, "campo 'loop_id' deve ser uma string não vazia"
    n_tasks = payload.get("N")
    if n_tasks is not None and (isinstance(n_tasks, bool) or not isinstance(n_tasks, int) or n_tasks < 1):
        return False, "campo 'N' deve ser inteiro >= 1 ou null"
    if "config" in payload and not isinstance(payload["config"], dict):
        return False, "campo 'config' deve ser um objeto"
    iterations = payload.get("iterations")
    if not isinstance(iterations, list):
        return False, "campo obrigatório ausente ou inválido: 'iterations'"
    for i, it in enumerate(iterations):
        valid, reason = validate_iteration_payload(i, it)
        if not valid:
            return False, reason
    return True, ""
