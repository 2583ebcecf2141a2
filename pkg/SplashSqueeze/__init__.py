# Copyright 2016 Mario Graff Guerrero

# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at

#     http://www.apache.org/licenses/LICENSE-2.0

# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.


from .curve import GridCurve
from .vacuum import WallSet, solve_vacuum
from .plasma import build_initial_data
from .evolve import PlasmaVacuumState, run
__all__ = ["GridCurve", "WallSet", "solve_vacuum", "build_initial_data", "PlasmaVacuumState", "run"]
__version__ = '0.1.0'
