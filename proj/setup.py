# Copyright (c) 2026 tmnlab contributors
# SPDX-License-Identifier: Apache-2.0

import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        out_dir = Path(self.get_ext_fullpath(ext.name)).parent.resolve()
        build_dir = Path(self.build_temp).resolve()
        build_dir.mkdir(parents=True, exist_ok=True)
        source_dir = Path(__file__).parent.resolve()
        subprocess.run(
            [
                "cmake",
                "-S", str(source_dir),
                "-B", str(build_dir),
                f"-DPython3_EXECUTABLE={sys.executable}",
                f"-DTMN_PYTHON_OUTPUT_DIR={out_dir}",
                "-DTMN_BUILD_TESTS=OFF",
                "-DTMN_BUILD_CLI=OFF",
                "-DCMAKE_BUILD_TYPE=Release",
            ],
            check=True,
        )
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "_core",
             "--parallel"],
            check=True,
        )


setup(
    ext_modules=[CMakeExtension("tmnlab._core")],
    cmdclass={"build_ext": CMakeBuild},
)
