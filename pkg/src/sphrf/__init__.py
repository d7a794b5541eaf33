"""Training-free spherical radiance fields for wide-baseline panoramas.

Modules: ``sphere_geom`` (equirectangular geometry), ``panorama`` (images and
cube maps), ``volume_render`` (compositing and sampling), ``visibility``
(logistic-mixture occlusion), ``depth_sampler`` (uniform and mono-guided depth
candidates), ``mvs`` (sphere-sweep stereo), ``renderer`` (novel views),
``scene_oracle`` (analytic ground truth), ``metrics`` and the ``sphrf`` CLI.
"""

__version__ = "0.1.0"
