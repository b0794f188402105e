"""Where is the mode strongest?  Mode-energy percentages on a map.

Every substation's voltage and current PSDs are scored by the share of
above-floor area that the mode occupies.  Only the source substation shows
the mode in its current too, so it alone is labelled S2.
"""

import sys
from pathlib import Path

from gridosc import svg
from gridosc.energy import ModeEnergyConfig, energy_report
from gridosc.ingest import ChannelKind
from gridosc.spectral import welch_preset
from gridosc.synth import demo_scenario, gen_network

out = Path(sys.argv[1]) if len(sys.argv) > 1 else None

sc = demo_scenario()
sc.duration_s, sc.gate, sc.rates = 1200.0, [(0.0, 1200.0)], [30.0]
chs, truth = gen_network(sc)
psds = {c.id: welch_preset(c, "paper-survey")
        for c in chs if c.kind in (ChannelKind.VPHM, ChannelKind.IPHM)}
cfg = ModeEnergyConfig.around(8.0)
rep = energy_report(chs, psds, cfg, grid=(40, 30, (-10.0, 140.0, -10.0, 100.0)))

for c in rep.channels:
    print(f"{c.id:15s} E = {c.e_percent:6.2f} %  {c.scenario.value}")

if out is not None:
    out.mkdir(parents=True, exist_ok=True)
    h = rep.heatmap
    (out / "heatmap.svg").write_text(svg.heatmap(h.values, h.x, h.y, "Mode energy (%)", "x (km)", "y (km)", "E %"))
    (out / "heatmap.csv").write_text(h.to_csv())
    print(f"heatmap written to {out}")
