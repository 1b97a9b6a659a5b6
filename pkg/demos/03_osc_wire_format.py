"""The positioning protocol on the wire, byte by byte.

Encodes the command messages the render PC would receive, dumps their exact
layout, and round-trips one through a local UDP socket.
Run as: python demos/03_osc_wire_format.py
"""

import socket

from wfslab import osc


def dump(label, msg):
    data = osc.encode(msg)
    print(f"{label}: {msg.address} {list(msg.args)}")
    print(f"  {len(data)} bytes (always a multiple of 4): {data.hex(' ')}")
    assert osc.decode(data) == msg
    return data


print("single position update for source 1:")
dump("position", osc.position_message(osc.PositionCommand(1, 1.0, 2.0)))

print("\nmoving the source 2 m east over 1.5 s:")
dump("trajectory", osc.trajectory_message(1, (0.0, 0.0), (2.0, 0.0), 1.5))

print("\nthe classic 28-byte packet (address remapped to /source/<id>/xy):")
schema = osc.AddressSchema(position_pattern="/source/{id}/xy")
dump("short form", osc.position_message(osc.PositionCommand(1, 1.0, 2.0), schema))

print("\nall four argument types in one message:")
dump("mixed", osc.OscMessage("/demo", (7, 0.5, "ok", b"\x01\x02\x03")))

# loopback: what we encode is exactly what arrives
server = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
server.bind(("127.0.0.1", 0))
server.settimeout(2.0)
host, port = server.getsockname()
sent = osc.send_position(osc.PositionCommand(3, -0.25, 0.75), (host, port))
data, _ = server.recvfrom(4096)
server.close()
received = osc.decode(data)
print(f"\nloopback check: sent {sent} bytes to {host}:{port}")
print(f"  received {received.address} {list(received.args)} -- intact")
