"""Secret-key generation over two-input multiple-access channels with public communication.

Modules: :mod:`macsk.info` (information kernel), :mod:`macsk.rates` (R* and
n-letter rates), :mod:`macsk.fbcode` (feedback codes), :mod:`macsk.converse`
(one-shot converse and lemma checkers), :mod:`macsk.protocols` and
:mod:`macsk.feedback` (SK schemes), :mod:`macsk.cli` (command line).
"""

__version__ = "0.1.0"

from .info import (BudgetExceeded, FiniteDist, JointDist, MacChannel, adder_mac, conditional_entropy,
                   entropy, kl_divergence, mutual_information, noisy_adder_mac, security_index,
                   useless_mac, xor_mac)

__all__ = [
    "__version__", "BudgetExceeded", "FiniteDist", "JointDist", "MacChannel", "adder_mac",
    "conditional_entropy", "entropy", "kl_divergence", "mutual_information", "noisy_adder_mac",
    "security_index", "useless_mac", "xor_mac",
]
