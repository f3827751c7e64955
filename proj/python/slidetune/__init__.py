# Copyright 2026 The slidetune Authors.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Slide-level fine-tuning on frozen patch embeddings."""

import json

from slidetune._core import (
    ConfigError,
    FormatError,
    Model,
    NumericError,
    ShapeError,
    SlidetuneError,
    balanced_accuracy,
    bootstrap_ci,
    gated_attention_pool,
    gradcheck,
    max_pool,
    mean_pool,
    read_embedding,
    render_tables,
    roc_auc,
    softmax_cross_entropy,
    synthesize,
    weighted_f1,
    write_embedding,
)
from slidetune import _core


def run_experiment(protocol, manifest, methods, **kwargs):
    """Runs a suite; returns one dict per run record."""
    return [json.loads(line) for line in _core.run_experiment(protocol, str(manifest), list(methods), **kwargs)]


__all__ = [
    "ConfigError",
    "FormatError",
    "Model",
    "NumericError",
    "ShapeError",
    "SlidetuneError",
    "balanced_accuracy",
    "bootstrap_ci",
    "gated_attention_pool",
    "gradcheck",
    "max_pool",
    "mean_pool",
    "read_embedding",
    "render_tables",
    "roc_auc",
    "run_experiment",
    "softmax_cross_entropy",
    "synthesize",
    "weighted_f1",
    "write_embedding",
]
