"""Plain-text container for named arrays and scalars (stage handoff files)."""

import numpy as np

from .errors import DataError


def write_artifact(path, kind, scalars=None, arrays=None):
    scalars = scalars or {}
    arrays = arrays or {}
    with open(path, "w") as fh:
        fh.write(f"# koopstab artifact: {kind}\n")
        for name, value in scalars.items():
            if isinstance(value, float):
                fh.write(f"scalar {name} = {value:.17g}\n")
            else:
                fh.write(f"scalar {name} = {value}\n")
        for name, arr in arrays.items():
            arr = np.atleast_2d(np.asarray(arr, float))
            fh.write(f"array {name} rows={arr.shape[0]} cols={arr.shape[1]}\n")
            for row in arr:
                fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_artifact(path, expected_kind=None):
    scalars, arrays = {}, {}
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# koopstab artifact:"):
            raise DataError(f"{path} is not a koopstab artifact")
        kind = header.split(":", 1)[1].strip()
        if expected_kind is not None and kind != expected_kind:
            raise DataError(f"{path} holds a {kind!r} artifact, expected {expected_kind!r}")
        line = fh.readline()
        while line:
            line = line.strip()
            if not line:
                line = fh.readline()
                continue
            if line.startswith("scalar "):
                name, value = line[len("scalar "):].split("=", 1)
                value = value.strip()
                try:
                    scalars[name.strip()] = int(value)
                except ValueError:
                    try:
                        scalars[name.strip()] = float(value)
                    except ValueError:
                        scalars[name.strip()] = value
                line = fh.readline()
            elif line.startswith("array "):
                head = line[len("array "):].split()
                name = head[0]
                rows = int(head[1].split("=")[1])
                cols = int(head[2].split("=")[1])
                data = np.empty((rows, cols))
                for r in range(rows):
                    data[r] = np.fromstring(fh.readline(), sep=" ")
                arrays[name] = data
                line = fh.readline()
            else:
                raise DataError(f"unrecognized artifact line: {line!r}")
    return kind, scalars, arrays
