"""Comparing the learned FTL against DFTL and SFTL baselines.

All three schemes share the same data path (buffering, flush placement,
GC), so write amplification is identical and the interesting differences
are mapping-table memory and read behaviour.

Equivalent CLI:
    ftlsim compare --ftl dftl,sftl,leaftl --synth sequential --count 65536
"""

from ftlsim import sim
from ftlsim.config import Config
from ftlsim.workload import synth

conf = Config(
    channels=2,
    blocks_per_channel=160,
    pages_per_block=256,
    oob_size=256,
    gamma=8,
    buffer_bytes=256 * 4096,
    compaction_interval=4096,
)

for kind in ("sequential", "strided", "zipf"):
    events = synth(kind, 65536, conf.logical_pages, seed=0, read_ratio=0.2)
    doc = sim.compare(["dftl", "sftl", "leaftl"], conf, events)
    print(f"\n{kind} workload ({len(events)} ops), vs {doc['baseline']}:")
    header = f"  {'ftl':8} {'mapping bytes':>14} {'ratio':>7} {'waf':>7} {'mean read us':>13}"
    print(header)
    for kind_name, res in doc["runs"].items():
        c = res["counters"]
        ratio = doc["ratios_vs_baseline"].get(kind_name, {}).get("mapping_bytes", 1.0)
        print(
            f"  {kind_name:8} {c['mapping_bytes']:>14} {ratio:>7.3f} "
            f"{c['waf']:>7.3f} {res['read_latency_us']['mean']:>13.2f}"
        )
