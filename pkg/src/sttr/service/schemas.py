"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class SynthRequest(BaseModel):
    out_path: str
    seed: int = 0
    num_classes: int = Field(4, ge=2)
    clips_per_class: int = Field(50, ge=1)
    frames: int = Field(32, ge=1)
    joints: int = Field(25, ge=2)
    noise: float = Field(0.02, ge=0.0)


class SynthResponse(BaseModel):
    path: str
    clips: int
    num_classes: int
    frames: int
    joints: int


class ParseNtuRequest(BaseModel):
    input_dir: str
    out_path: str
    target_frames: int = Field(300, ge=1)
    max_bodies: int = Field(2, ge=1)


class ParseNtuResponse(BaseModel):
    path: str
    clips: int
    files: list[str]


class TrainRequest(BaseModel):
    data_path: str
    stream: str = Field(pattern="^(s-tr|t-tr)$")
    run_dir: str
    bones: bool = False
    plan: str = Field("desk", pattern="^(desk|full)$")
    heads: Optional[int] = None
    epochs: int = Field(50, ge=1)
    batch_size: int = Field(32, ge=1)
    base_lr: float = Field(0.02, gt=0)
    lr_drop_epochs: list[int] = [30, 42]
    lr_drop_factor: float = Field(10.0, gt=1)
    momentum: float = Field(0.9, ge=0, lt=1)
    weight_decay: float = Field(1e-4, ge=0)
    drop_rate: float = Field(0.1, ge=0, lt=1)
    seed: int = 0
    deterministic: bool = False
    test_fraction: float = Field(0.2, gt=0, lt=1)


class TrainResponse(BaseModel):
    run_dir: str
    checkpoint: str
    scores: str
    epochs: int
    final_train_accuracy: float
    best_train_accuracy: float
    eval_accuracy: float


class EvalRequest(BaseModel):
    checkpoint: str
    data_path: str
    scores_out: str
    batch_size: int = Field(32, ge=1)


class EvalResponse(BaseModel):
    scores: str
    accuracy: float
    loss: float
    samples: int


class FuseRequest(BaseModel):
    a_path: str
    b_path: str
    out_path: str


class FuseResponse(BaseModel):
    fused: str
    accuracy: float
    samples: int


class ParamsRequest(BaseModel):
    channels: int = Field(256, ge=1)
    joints: int = Field(25, ge=1)
    partitions: int = Field(3, ge=1)
    kernel_t: int = Field(9, ge=1)
    heads: int = Field(8, ge=1)
    stream: Optional[str] = Field(None, pattern="^(s-tr|t-tr)$")
    plan: str = Field("full", pattern="^(desk|full)$")
    bones: bool = False
    num_classes: int = Field(60, ge=2)


class ParamsResponse(BaseModel):
    channels: int
    units: dict[str, dict[str, int]]
    network: Optional[dict] = None


class GradcheckRequest(BaseModel):
    seeds: int = Field(10, ge=1)
    tolerance: float = Field(1e-5, gt=0)
    include_streams: bool = True


class GradcheckCase(BaseModel):
    op: str
    seed: int
    max_rel_error: float
    passed: bool


class GradcheckResponse(BaseModel):
    tolerance: float
    cases: list[GradcheckCase]
    max_rel_error: float
    passed: bool


class ErrorResponse(BaseModel):
    error: str
    detail: str
