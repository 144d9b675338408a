# Copyright 2026 The avse Authors
#
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

"""Audio-visual speech enhancement: features, metrics, model and training."""

import json as _json

from ._avse import *  # noqa: F401,F403
from ._avse import Model, train as _train

__version__ = "0.1.0"


def train(data, config=None, seed=None):
    """Train on a dataset directory. `config` may be a dict or a JSON string."""
    if isinstance(config, dict):
        config = _json.dumps(config)
    return _train(str(data), config or "", seed)


def model_from_config(config=None, seed=0):
    if isinstance(config, dict):
        config = _json.dumps(config)
    return Model(config or "", seed)
