from magnon_cavity_lab.constants import TWO_PI
from magnon_cavity_lab.physics import HybridModel, ResonatorParams, SpinEnsembleParams

MHZ = TWO_PI * 1e6
GHZ = TWO_PI * 1e9


def paper_model(g_eff_mhz=450.0, gamma_mhz=50.0, kappa_c_mhz=0.3, kappa_i_mhz=2.7) -> HybridModel:
    res = ResonatorParams(omega_r=5.90 * GHZ, kappa_c=kappa_c_mhz * MHZ, kappa_i=kappa_i_mhz * MHZ)
    ens = SpinEnsembleParams(g_s=2.17, B_a=0.024, gamma=gamma_mhz * MHZ)
    return HybridModel.from_parameters(res, ens, g_eff_mhz * MHZ)


def rel(a, b):
    return abs(a - b) / abs(b) if b != 0 else abs(a)
