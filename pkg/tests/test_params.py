import pytest

from qcycle import ModelParams
from qcycle.params import ParamError, kelvin_to_mev


def test_table_defaults():
    p = ModelParams()
    assert (p.eps_Q0, p.E_Q0, p.mu_N, p.mu_P, p.V_P, p.V_N) == (280, 822, -75, 75, 140, 120)
    assert (p.eps_L_prime, p.eps_H_prime, p.eps_A_prime, p.eps_B_prime) == (360, 220, 465, -495)
    assert (p.lambda_AQ, p.lambda_BQ, p.lambda_LQ, p.lambda_HQ, p.lambda_LH) == (100,) * 4 + (250,)
    assert (p.U_LH, p.U_pp, p.T, p.mu_Fd, p.mu_Pc) == (240, 76.3, 25, 410, -440)
    assert (p.gamma_Fd, p.gamma_Pc, p.Gamma_P, p.Gamma_N) == (0.0001, 0.0001, 0.002, 0.002)
    assert (p.Delta_AQ, p.Delta_BQ, p.Delta_LQ, p.Delta_HQ, p.Delta_LH) == (0.1, 0.1, 0.06, 0.06, 0.1)
    assert (p.U_ee, p.U_ep, p.U_ch0, p.U_w0) == (305, 610, 770, 500)
    assert (p.l_p, p.l_e, p.x_ch, p.x_w, p.l_ch, p.l_w, p.zeta) == (0.25, 0.25, 1.7, 2.7, 0.05, 0.1, 8.55)
    assert p.dt == 1e-3


def test_diffusion_coefficient():
    assert ModelParams().diffusion == pytest.approx(2.924, abs=1e-3)


def test_room_temperature_conversion():
    assert kelvin_to_mev(298.0) == pytest.approx(25.68, abs=0.005)


@pytest.mark.parametrize("field,value", [("T", 0.0), ("lambda_LH", -1.0), ("zeta", 0.0),
                                         ("l_w", -0.1), ("Gamma_N", -1e-3)])
def test_rejects_out_of_domain(field, value):
    with pytest.raises(ParamError) as info:
        ModelParams(**{field: value})
    assert info.value.name == field


def test_rejects_unknown_convention():
    with pytest.raises(ParamError):
        ModelParams(proton_gap_convention="sideways")
