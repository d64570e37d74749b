from .crc import crc16
from .packets import (
    BROADCAST_ID,
    BusPacket,
    EncodeError,
    Instruction,
    StreamDecoder,
    StreamDiagnostics,
    decode_stream,
    encode_packet,
)
from .registers import OperatingMode, Register, RegisterFile, StatusError
from .emulator import EmulatorTransport, ServoEmulator, TwoServoBus
from .adapter import F1_SERVO_ID, FLIPPER_SERVO_ID, HandBus
from .serial_link import SerialTransport
