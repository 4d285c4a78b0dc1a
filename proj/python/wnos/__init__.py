# Copyright 2026 The WNOS Authors
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Network control problems to distributed control programs."""

from wnos._core import (
    WnosError,
    binomial,
    compare_runs,
    decompose,
    differentiate,
    evaluate,
    parse_expr,
    run_experiment,
    scenario,
)

SCHEMES = ("wnos-t-p", "wnos-t", "wnos-p", "no-control", "best-response")

__all__ = [
    "SCHEMES",
    "WnosError",
    "binomial",
    "compare_runs",
    "decompose",
    "differentiate",
    "evaluate",
    "parse_expr",
    "run_experiment",
    "scenario",
]
