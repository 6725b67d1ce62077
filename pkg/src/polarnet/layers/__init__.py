from .complex import (
    ComplexTensor,
    GTransportSpec,
    TRELU_QUADRANT_EXAMPLES,
    WfmConvSpec,
    distance_transform,
    g_transport,
    residual_combine,
    trelu,
    wfm_conv,
)
from .real import fully_connected, max_pool, real_conv, softmax_cross_entropy
from .tensor_ring import TensorRingSpec, fit_tensor_ring, tensor_ring_param_count, tensor_ring_reconstruct
