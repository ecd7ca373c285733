import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from pydantic import ValidationError

from exceptions import DomainError
from models import GMParams, Reaction, ReactionNetwork
from services.gm_service import GMService
from services.reaction_network_service import CoefficientTensor, ReactionNetworkService


@st.composite
def random_networks(draw, max_species=4, max_order=3):
    S = draw(st.integers(1, max_species))
    reactions = []
    for _ in range(draw(st.integers(0, 5))):
        order = draw(st.integers(1, max_order))
        reactants = draw(st.lists(st.integers(0, S - 1), min_size=order, max_size=order))
        alpha = [reactants.count(i) for i in range(S)]
        beta = draw(st.lists(st.integers(0, 3), min_size=S, max_size=S))
        rate = draw(st.floats(0.1, 5.0))
        reactions.append(Reaction(alpha=alpha, beta=beta, rate=rate))
    return ReactionNetwork(species=S, reactions=reactions)


def mass_action_rhs(network: ReactionNetwork, Y: np.ndarray) -> np.ndarray:
    out = np.zeros(network.species)
    for r in network.reactions:
        monomial = np.prod([Y[i] ** a for i, a in enumerate(r.alpha)])
        out += (np.asarray(r.beta) - np.asarray(r.alpha)) * r.rate * monomial
    return out


def test_lex_index_examples():
    """Test the first, last and a middle lexicographic position"""
    assert ReactionNetworkService.lex_index((1, 1, 1), 2) == 1
    assert ReactionNetworkService.lex_index((2, 2, 2), 2) == 8
    assert ReactionNetworkService.lex_index((1, 2), 2) == 2


@pytest.mark.parametrize("S,k", [(S, k) for S in (1, 2, 3) for k in (1, 2, 3, 4)])
def test_lex_index_is_bijection(S, k):
    positions = [ReactionNetworkService.lex_index(t, S) for t in itertools.product(range(1, S + 1), repeat=k)]
    assert positions == list(range(1, S ** k + 1))
    for position, expected in zip(positions, itertools.product(range(1, S + 1), repeat=k)):
        assert ReactionNetworkService.lex_tuple(position, S, k) == expected


def test_lex_index_rejects_out_of_range_entries():
    with pytest.raises(DomainError):
        ReactionNetworkService.lex_index((1, 3), 2)
    with pytest.raises(DomainError):
        ReactionNetworkService.lex_index((0,), 2)


def test_canonical_position_examples():
    assert ReactionNetworkService.canonical_position(1, 2, 2, 3) == 2
    assert ReactionNetworkService.canonical_position(2, 1, 2, 3) == 7
    assert ReactionNetworkService.canonical_position(1, 1, 3, 4) == 1


@pytest.mark.parametrize("S,varsigma", [(S, v) for S in (2, 3, 4) for v in (1, 2, 3, 4)])
def test_canonical_position_matches_lex_index(S, varsigma):
    for i in range(1, S + 1):
        for j in range(1, S + 1):
            expected = ReactionNetworkService.lex_index((i,) * (varsigma - 1) + (j,), S)
            assert ReactionNetworkService.canonical_position(i, j, S, varsigma) == expected


def test_canonical_position_needs_two_species():
    with pytest.raises(DomainError):
        ReactionNetworkService.canonical_position(1, 1, 1, 3)


def test_autocatalytic_tensor_matrix(autocatalytic_network):
    """Test the two-species cubic tensor against the closed form"""
    F3 = ReactionNetworkService.build_tensor(autocatalytic_network, 3)
    expected = np.array([
        [1.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0],
        [0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0],
    ])
    np.testing.assert_array_equal(F3.to_dense(), expected)
    closed_form = ReactionNetworkService.autocatalytic_tensor(2, 3)
    np.testing.assert_array_equal(closed_form.to_dense(), expected)
    assert F3.max_rate == closed_form.max_rate == 1.0
    assert F3.sigma_max == closed_form.sigma_max == 3.0


def test_autocatalytic_norms(autocatalytic_network):
    norms = ReactionNetworkService.tensor_norms(ReactionNetworkService.build_tensor(autocatalytic_network, 3))
    assert norms.two_norm == pytest.approx(math.sqrt(5.0), rel=1e-12)
    assert norms.two_bound == pytest.approx(math.sqrt(6.0), rel=1e-12)
    assert ReactionNetworkService.autocatalytic_norm_bound(2, 1.0) == pytest.approx(math.sqrt(6.0))


def test_build_tensor_empty_network_and_other_orders(autocatalytic_network):
    empty = ReactionNetwork(species=3)
    F = ReactionNetworkService.build_tensor(empty, 2)
    assert F.nnz == 0
    assert F.shape == (3, 9)
    assert ReactionNetworkService.build_tensor(autocatalytic_network, 2).nnz == 0


def test_build_tensor_rejects_order_zero(autocatalytic_network):
    with pytest.raises(DomainError):
        ReactionNetworkService.build_tensor(autocatalytic_network, 0)


def test_duplicate_reactions_are_summed():
    reaction = Reaction(alpha=[1, 1], beta=[0, 2], rate=1.5)
    network = ReactionNetwork(species=2, reactions=[reaction, reaction])
    F2 = ReactionNetworkService.build_tensor(network, 2)
    dense = F2.to_dense()
    assert dense[0, 1] == pytest.approx(-3.0)
    assert dense[1, 1] == pytest.approx(3.0)
    assert F2.nnz == 2


def test_monomial_override_moves_column():
    network = ReactionNetwork(species=2, reactions=[
        Reaction(alpha=[2, 1], beta=[3, 0], rate=1.0, monomial=[2, 1, 1]),
    ])
    F3 = ReactionNetworkService.build_tensor(network, 3)
    # (2, 1, 1) sits at position 5
    assert F3.cols.tolist() == [4, 4]
    Y = np.array([0.7, 1.3])
    np.testing.assert_allclose(ReactionNetworkService.evaluate_tensor(F3, Y), mass_action_rhs(network, Y))


def test_reaction_validation():
    """Test that malformed reactions are rejected by the schema"""
    with pytest.raises(ValidationError, match="pure source"):
        Reaction(alpha=[0, 0], beta=[1, 0], rate=1.0)
    with pytest.raises(ValidationError):
        Reaction(alpha=[1, 0], beta=[0, 1], rate=0.0)
    with pytest.raises(ValidationError, match="permutation"):
        Reaction(alpha=[2, 0], beta=[0, 1], rate=1.0, monomial=[1, 2])
    with pytest.raises(ValidationError, match="length"):
        ReactionNetwork(species=3, reactions=[Reaction(alpha=[1, 0], beta=[0, 1], rate=1.0)])


def test_tensor_power_examples():
    np.testing.assert_array_equal(ReactionNetworkService.tensor_power(np.array([2.0, 3.0]), 2), [4, 6, 6, 9])
    np.testing.assert_array_equal(ReactionNetworkService.tensor_power(np.array([5.0, 7.0]), 0), [1.0])
    y1, y2 = 2.0, 3.0
    expected = [y1 ** 3, y1 ** 2 * y2, y1 * y2 * y1, y1 * y2 ** 2, y2 * y1 ** 2, y2 * y1 * y2, y2 ** 2 * y1, y2 ** 3]
    np.testing.assert_allclose(ReactionNetworkService.tensor_power(np.array([y1, y2]), 3), expected)


@given(
    Y=arrays(np.float64, st.integers(1, 3), elements=st.floats(-3, 3)),
    a=st.integers(0, 3),
    b=st.integers(0, 3),
)
def test_tensor_power_composes(Y, a, b):
    combined = ReactionNetworkService.tensor_power(Y, a + b)
    split = np.kron(ReactionNetworkService.tensor_power(Y, a), ReactionNetworkService.tensor_power(Y, b))
    np.testing.assert_allclose(combined, split, rtol=1e-12, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(network=random_networks(), data=st.data())
def test_rhs_matches_mass_action(network, data):
    """Test the assembled tensors against a direct monomial sum"""
    Y = data.draw(arrays(np.float64, network.species, elements=st.floats(-2, 2)))
    tensors = ReactionNetworkService.build_tensors(network)
    np.testing.assert_allclose(
        ReactionNetworkService.rhs_eval(tensors, Y), mass_action_rhs(network, Y), rtol=1e-10, atol=1e-10
    )


@settings(max_examples=100, deadline=None)
@given(network=random_networks())
def test_norm_chain(network):
    for order in range(1, max(network.max_order, 1) + 1):
        norms = ReactionNetworkService.tensor_norms(ReactionNetworkService.build_tensor(network, order))
        slack = 1.0 + 1e-12
        assert norms.two_norm <= math.sqrt(norms.inf_norm * norms.one_norm) * slack + 1e-12
        assert math.sqrt(norms.inf_norm * norms.one_norm) <= norms.two_bound * slack + 1e-12


def test_zero_tensor_norms():
    norms = ReactionNetworkService.tensor_norms(CoefficientTensor.zeros(3, 2))
    assert (norms.inf_norm, norms.one_norm, norms.two_norm, norms.two_bound) == (0.0, 0.0, 0.0, 0.0)


def test_rhs_eval_zero_and_mismatch():
    tensors = ReactionNetworkService.build_tensors(ReactionNetwork(species=2))
    np.testing.assert_array_equal(ReactionNetworkService.rhs_eval(tensors, np.array([1.0, 2.0])), [0.0, 0.0])
    with pytest.raises(DomainError):
        ReactionNetworkService.rhs_eval(tensors, np.ones(3))


def test_gm_rhs_at_unit_state():
    params = GMParams(D1=1e-4, D2=5e-5, mu1=2.0, mu2=3.0, c1=0.5, b1=1.5, b2=0.25)
    system = GMService.gm_network(params)
    rhs = ReactionNetworkService.rhs_eval(system.tensors, np.array([1.0, 1.0]))
    np.testing.assert_allclose(rhs, [1.5 - 2.0 + 0.5, 0.25 - 3.0 - 0.5])


def test_build_tensors_sources_and_decay(conversion_network):
    tensors = ReactionNetworkService.build_tensors(conversion_network, sources=[1.0, 0.0], decay=[0.5, 0.25])
    np.testing.assert_array_equal(tensors[0].to_dense().ravel(), [1.0, 0.0])
    np.testing.assert_allclose(tensors[1].to_dense(), [[-2.5, 3.0], [2.0, -3.25]])
    assert tensors.max_order == 1
    assert tensors[3].nnz == 0
    with pytest.raises(DomainError):
        ReactionNetworkService.build_tensors(conversion_network, sources=[1.0])


def test_evaluate_tensor_nodewise(autocatalytic_network):
    F3 = ReactionNetworkService.build_tensor(autocatalytic_network, 3)
    Y = np.array([[0.5, 1.0, 2.0], [1.5, 0.25, 1.0]])
    nodewise = ReactionNetworkService.evaluate_tensor(F3, Y)
    for node in range(3):
        np.testing.assert_allclose(nodewise[:, node], ReactionNetworkService.evaluate_tensor(F3, Y[:, node]))


def test_stoich_sum():
    params = GMService.stable_params()
    assert ReactionNetworkService.stoich_sum(GMService.gm_network(params).network) == 2.0
    assert ReactionNetworkService.stoich_sum(ReactionNetwork(species=2)) == 0.0


def test_autocatalytic_network_needs_two_species():
    with pytest.raises(DomainError):
        ReactionNetworkService.autocatalytic_network(1, 3)
    with pytest.raises(DomainError):
        ReactionNetworkService.autocatalytic_tensor(2, 3, rates=np.ones((3, 3)))
