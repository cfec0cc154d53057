"""Launch a small lockstep session server for frontend protocol tests.

Usage: python3 test/server.py PORT
"""

import sys

import uvicorn

from hockeydda import service

TINY = service.SessionTimings(
    practice_ticks=20,
    pre_session_ticks=40,
    half_ticks=60,
    break_ticks=10,
    adapting_ticks=5,
)


def main() -> None:
    port = int(sys.argv[1])
    app = service.create_app(timings=TINY, tick_interval=0)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")


if __name__ == "__main__":
    main()
