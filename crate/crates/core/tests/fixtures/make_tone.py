"""Writes tone_1khz.wav (16-bit stereo PCM, 44.1 kHz) and the integer
samples it contains to tone_1khz.txt, one "left right" pair per line.

Uses only the standard library so the reader under test and the reference
share no code.
"""

import math
import struct
import wave

RATE = 44100
FREQ = 1000.0
FRAMES = 441
AMPLITUDE = 0.5


def samples():
    for n in range(FRAMES):
        left = round(AMPLITUDE * 32767 * math.sin(2 * math.pi * FREQ * n / RATE))
        right = -left
        yield left, right


def main():
    pairs = list(samples())
    with wave.open("tone_1khz.wav", "wb") as w:
        w.setnchannels(2)
        w.setsampwidth(2)
        w.setframerate(RATE)
        w.writeframes(b"".join(struct.pack("<hh", l, r) for l, r in pairs))
    with open("tone_1khz.txt", "w") as f:
        for l, r in pairs:
            f.write(f"{l} {r}\n")


if __name__ == "__main__":
    main()
