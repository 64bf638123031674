"""Hand-computed session fixtures shared by several test modules."""

import numpy as np

from obs360lab.model import BitrateLadder, CapacityTrace, OverlapMap, VideoConfig

# Three segments, two tiles, capacity 4/8/2 Mbps on the first three seconds
# then 10 Mbps, initial buffer 0.5 s, one-second segments.
#
# seg 1: 2 Mb at 4 Mbps -> 0.5, 1 Mb -> 0.75; stalls 0.25 s after the
#        0.5 s of pre-buffered content; plays [0.75, 1.75]
# seg 2: 4 Mb = 1 Mb at 4 + 3 Mb at 8 -> 1.375; 4 Mb at 8 -> 1.875;
#        duration 1.125 against a 1 s buffer: 0.125 s stall; plays [1.875, 2.875]
# seg 3: 4 Mb = 1 Mb at 8 + 2 Mb at 2 + 1 Mb at 10 -> 3.1; 4 Mb at 10 -> 3.5;
#        duration 1.625: 0.625 s stall; plays [3.5, 4.5]
# decisions at 0, 0.75, 1.875; playback ends 1.75, 2.875, 4.5
DYNAMICS = dict(
    capacity=CapacityTrace([0, 1, 2, 3], [4, 8, 2, 10], duration=100),
    decisions=np.array([[2.0, 1.0], [4.0, 4.0], [4.0, 4.0]]),
    omega=OverlapMap(np.array([[0.7, 0.3], [0.5, 0.5], [0.2, 0.8]])),
    video=VideoConfig(3, segment_length=1.0, initial_buffer=0.5),
    ladder=BitrateLadder((1, 2, 4, 8)),
    tile_start=[[0.0, 0.5], [0.75, 1.375], [1.875, 3.1]],
    tile_finish=[[0.5, 0.75], [1.375, 1.875], [3.1, 3.5]],
    buffers=[1.0, 1.0, 1.0],
    rebuffer=[0.25, 0.125, 0.625],
    play_start=[0.75, 1.875, 3.5],
    play_end=[1.75, 2.875, 4.5],
    dbar=[4.0, 8 / 1.125, 8 / 1.625],
    aux_sets=((), (), (1,), (2, 3)),
)
