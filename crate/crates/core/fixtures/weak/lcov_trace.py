"""Line coverage for a test script, written as an LCOV tracefile.

usage: python3 -B lcov_trace.py --out lcov.info --source a.py [--source b.py] test_script.py
"""
import argparse
import os
import runpy
import sys
import threading


def executable_lines(path):
    with open(path) as f:
        code = compile(f.read(), path, "exec")
    lines, stack = set(), [code]
    while stack:
        co = stack.pop()
        for _, _, line in co.co_lines():
            if line:
                lines.add(line)
        stack.extend(c for c in co.co_consts if hasattr(c, "co_lines"))
    return lines


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", required=True)
    ap.add_argument("--source", action="append", required=True)
    ap.add_argument("script")
    args = ap.parse_args()

    sources = {os.path.abspath(s): s for s in args.source}
    hits = {s: {} for s in args.source}

    def local(frame, event, arg):
        if event == "line":
            counts = hits[sources[os.path.abspath(frame.f_code.co_filename)]]
            counts[frame.f_lineno] = counts.get(frame.f_lineno, 0) + 1
        return local

    def global_trace(frame, event, arg):
        if os.path.abspath(frame.f_code.co_filename) in sources:
            return local
        return None

    sys.path.insert(0, os.path.dirname(os.path.abspath(args.script)))
    status = 0
    sys.settrace(global_trace)
    threading.settrace(global_trace)
    try:
        runpy.run_path(args.script, run_name="__main__")
    except SystemExit as e:
        status = e.code if isinstance(e.code, int) else (0 if e.code is None else 1)
    finally:
        sys.settrace(None)

    with open(args.out, "w") as out:
        out.write("TN:\n")
        for name in sorted(args.source):
            lines = executable_lines(name)
            counts = hits[name]
            out.write("SF:%s\n" % name)
            for line in sorted(lines):
                out.write("DA:%d,%d\n" % (line, counts.get(line, 0)))
            out.write("LF:%d\n" % len(lines))
            out.write("LH:%d\n" % sum(1 for l in lines if counts.get(l, 0) > 0))
            out.write("end_of_record\n")
    sys.exit(status)


if __name__ == "__main__":
    main()
