"""
HCRNN: hierarchical convolutional recurrent network for 3D hand pose estimation from
single depth maps, built on a small numpy autodiff engine.
"""

__version__ = "0.1.0"
