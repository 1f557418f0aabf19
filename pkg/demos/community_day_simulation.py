"""Simulate one day of a ten-member solar community with shared storage.

Generation follows a midday bell, rates are time-of-use.  The run prints the
hourly community price, storage dispatch and state of charge, then the
welfare summary against both baselines.
"""

from dnem import run, solar_day_scenario

scenario = solar_day_scenario(seed=42, n_members=10, horizon=24, with_bess=True)
records, summary = run(scenario, "dnem")

print(f"{'t':>2}  {'g_N':>7}  {'d_N':>7}  {'b_N':>7}  {'z_N':>7}  {'soc':>7}  {'price':>7}  zone")
for r in records:
    print(
        f"{r.t:2d}  {r.g_n:7.2f}  {r.d_n:7.2f}  {r.b_n:7.2f}  {r.z_n:7.2f}  "
        f"{r.soc:7.2f}  {r.price.value:7.4f}  {r.price.zone.value}"
    )

print()
print(f"total welfare             : {summary.total_welfare:10.4f} $")
print(f"gain vs standalone        : {summary.welfare_gain_vs_standalone:10.4f} %")
print(f"gain vs sign-based pricing: {summary.welfare_gain_vs_sign_based:10.4f} %")
print(f"zone histogram            : {summary.zone_histogram}")
