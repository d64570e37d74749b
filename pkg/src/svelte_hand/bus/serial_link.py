"""Raw serial transport for real hardware (untested against hardware here;
the emulator transport is the supported backend in this repo)."""

from __future__ import annotations

import os
import termios

_BAUD_CONSTANTS = {
    9600: termios.B9600,
    19200: termios.B19200,
    38400: termios.B38400,
    57600: termios.B57600,
    115200: termios.B115200,
    230400: getattr(termios, "B230400", termios.B115200),
    1000000: getattr(termios, "B1000000", termios.B115200),
}


class SerialTransport:
    """Half-duplex byte stream over a tty device."""

    def __init__(self, device: str, baud: int = 57600):
        if baud not in _BAUD_CONSTANTS:
            raise ValueError(f"unsupported baud rate {baud}")
        self.device = device
        self.baud = baud
        self._fd = os.open(device, os.O_RDWR | os.O_NOCTTY | os.O_NONBLOCK)
        attrs = termios.tcgetattr(self._fd)
        speed = _BAUD_CONSTANTS[baud]
        # raw 8N1
        attrs[0] = 0                                    # iflag
        attrs[1] = 0                                    # oflag
        attrs[2] = termios.CS8 | termios.CREAD | termios.CLOCAL
        attrs[3] = 0                                    # lflag
        attrs[4] = speed                                # ispeed
        attrs[5] = speed                                # ospeed
        attrs[6][termios.VMIN] = 0
        attrs[6][termios.VTIME] = 0
        termios.tcsetattr(self._fd, termios.TCSANOW, attrs)

    def send(self, data: bytes) -> None:
        os.write(self._fd, data)

    def recv(self, max_bytes: int = 4096) -> bytes:
        try:
            return os.read(self._fd, max_bytes)
        except BlockingIOError:
            return b""

    def close(self) -> None:
        if self._fd >= 0:
            os.close(self._fd)
            self._fd = -1
