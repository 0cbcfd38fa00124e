import sys

# everything goes to stderr but info, stdout of the algorithm wrapper is reserved for the protocol
# set from the cli
verbose = False
quiet = False


def debug(message):
    if verbose:
        print("[debug] " + message, flush=True, file=sys.stderr)


def info(message, file=None):
    if not quiet:
        print(message, flush=True, file=file)


def warning(message):
    print("[warning] " + message, flush=True, file=sys.stderr)


def error(message):
    print("[error] " + message, flush=True, file=sys.stderr)
