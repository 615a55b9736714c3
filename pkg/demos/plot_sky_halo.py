"""
Why division leaves halos in the sky
====================================

In dense haze the transmission is tiny, and dividing by it amplifies
quantization and estimation errors into blotches.  The joint solver
regularises the clear image directly and keeps large sky regions flat.
"""
from pathlib import Path

from alfdehaze import SolverConfig, masked_variance, recover_direct, run, save_image
from alfdehaze.synthetic import depth_with_sky, linear_airlight, make_scene

out = Path(__file__).with_name("_output")
out.mkdir(exist_ok=True)

h, w = 96, 128
scene = make_scene(h, w, airlight=linear_airlight(h, w), depth=depth_with_sky(h, w),
                   beta=0.3, quantize=True, seed=8)
sky = scene.transmission <= 0.05
print(f"sky pixels: {int(sky.sum())}")

res = run(scene.hazy, SolverConfig())

###############################################################################
# Same transmission and airlight, two ways of producing the clear image.
direct = recover_direct(scene.hazy, res.transmission, res.airlight)
print(f"sky variance, joint solution:  {masked_variance(res.dehazed, sky):.5f}")
print(f"sky variance, direct division: {masked_variance(direct, sky):.5f}")

save_image(res.dehazed, out / "halo_joint.png")
save_image(direct, out / "halo_direct.png")
