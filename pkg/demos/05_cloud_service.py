"""
The cloud half over real HTTP: feeds, alerts, commands, export
==============================================================

Spins up the ingest service on a loopback port and talks to it the way
any ThingSpeak-style client would: write with the write key, read with
the read key, queue a command, watch an alert fire and get delivered.
"""
import requests

from plantsim.httpapi import make_server, serve_background
from plantsim.ingest import SINK_SMS, IngestService

service = IngestService()  # in-memory, virtual clock, no rate limit
channel = service.create_channel("demo-plant")
service.add_rule(channel.id, field_index=4, comparator="<", threshold=5.0,
                 sink=SINK_SMS, rearm_gap=1.0)

server = make_server(service, ("127.0.0.1", 0))
serve_background(server)
base = server.base_url
print("service listening on", base)

# --- writes: GET /update with the write key ----------------------------
for seq, (soil, water) in enumerate([(71.0, 20.0), (66.5, 12.0),
                                     (62.0, 4.2), (60.5, 9.0)], start=1):
    r = requests.get(f"{base}/update",
                     params={"api_key": channel.write_key, "field3": soil,
                             "field4": water, "seq": seq,
                             "created_at": f"1970-01-01T00:00:{seq:02d}Z"})
    print(f"update seq={seq} -> entry_id {r.text}")

# A duplicated upload (same seq) is acknowledged with the original id
# and stored exactly once.
r = requests.get(f"{base}/update", params={"api_key": channel.write_key,
                                           "field3": 99.0, "seq": 2})
print("replayed seq=2        -> entry_id", r.text)

# --- reads: feeds.json, a single field, CSV export ---------------------
feeds = requests.get(f"{base}/channels/{channel.id}/feeds.json",
                     params={"api_key": channel.read_key}).json()
print(f"feed has {len(feeds['feeds'])} entries; last:", feeds["feeds"][-1])

field4 = requests.get(f"{base}/channels/{channel.id}/fields/4.json",
                      params={"api_key": channel.read_key}).json()
print("water-level series:", [f["field4"] for f in field4["feeds"]])

csv_text = requests.get(f"{base}/channels/{channel.id}/export.csv",
                        params={"api_key": channel.read_key}).text
print("export.csv:")
for line in csv_text.splitlines():
    print("  ", line)

# --- alerts: the rule on field4 < 5 fired once, on the 4.2 cm entry ----
alerts = requests.get(f"{base}/channels/{channel.id}/alerts.json",
                      params={"api_key": channel.read_key}).json()
for a in alerts["alerts"]:
    print(f"alert #{a['id']}: field{a['field_index']} {a['comparator']} "
          f"{a['threshold']} (value {a['value']}) via {a['sink']}")
for d in alerts["delivery_log"]:
    print(f"  delivery: alert #{d['alert_id']} -> {d['status']}")

# --- commands: queue with the write key, device pops FIFO --------------
r = requests.post(f"{base}/channels/{channel.id}/commands",
                  params={"api_key": channel.write_key},
                  json={"verb": "PumpOn"})
print("queued command id", r.json()["id"])
cmd = requests.get(f"{base}/channels/{channel.id}/commands/execute",
                   params={"api_key": channel.write_key}).json()
print("device executes:", cmd["verb"])
empty = requests.get(f"{base}/channels/{channel.id}/commands/execute",
                     params={"api_key": channel.write_key})
print("queue now empty (HTTP", empty.status_code, ")")

server.shutdown()
server.server_close()
service.close()
