# Copyright 2013 Mario Graff Guerrero

# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at

#     http://www.apache.org/licenses/LICENSE-2.0

# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
from setuptools import setup
from os.path import join

with open('README.rst') as fpt:
    long_desc = fpt.read()
version = open("VERSION").readline().lstrip().rstrip()
lst = open(join("SplashSqueeze", "__init__.py")).readlines()
for k in range(len(lst)):
    v = lst[k]
    if v.count("__version__"):
        lst[k] = "__version__ = '%s'\n" % version
with open(join("SplashSqueeze", "__init__.py"), "w") as fpt:
    fpt.write("".join(lst))

setup(
    name="SplashSqueeze",
    description="""Splash singularities of a plasma-vacuum interface""",
    long_description=long_desc,
    version=version,
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Environment :: Console",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: Apache Software License",
        "Natural Language :: English",
        "Operating System :: MacOS :: MacOS X",
        "Operating System :: POSIX :: Linux",
        'Programming Language :: Python :: 3',
        "Topic :: Scientific/Engineering :: Physics"],
    packages=['SplashSqueeze', 'SplashSqueeze/tests'],
    include_package_data=True,
    zip_safe=False,
    package_data={'SplashSqueeze/conf': ['default_parameters.json',
                                         'tolerances.json']},
    install_requires=['numpy', 'scipy'],
    extras_require={'progress': ['tqdm'], 'test': ['nose']},
    entry_points={
        'console_scripts': ['splash-simulate=SplashSqueeze.command_line:simulate',
                            'splash-vacuum-family=SplashSqueeze.command_line:vacuum_family',
                            'splash-operators=SplashSqueeze.command_line:operators',
                            'splash-reversal-check=SplashSqueeze.command_line:reversal_check'],
    }
)
