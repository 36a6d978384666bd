"""Build step: compile each source file without writing bytecode."""
import sys

failed = 0
for path in sys.argv[1:]:
    with open(path) as f:
        try:
            compile(f.read(), path, "exec")
        except SyntaxError as e:
            print("%s:%s: %s" % (path, e.lineno, e.msg))
            failed += 1
sys.exit(1 if failed else 0)
