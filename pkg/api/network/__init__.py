from .network import ThresholdNetwork, network_init
from .node import LocalNode
