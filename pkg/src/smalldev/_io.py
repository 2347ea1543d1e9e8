"""Atomic file writers (temp file in the target directory, then rename)."""
import csv
import json
import os
import tempfile


def _atomic(path, write):
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_csv(path, header, rows):
    def _w(fh):
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        wr.writerows(rows)
    _atomic(path, _w)


def write_json(path, obj):
    _atomic(path, lambda fh: fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n"))


def write_text(path, text):
    _atomic(path, lambda fh: fh.write(text))
