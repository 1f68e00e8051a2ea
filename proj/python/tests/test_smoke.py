import numpy as np
import pytest

import plateid


def test_mesh_shape():
    mesh = plateid.generate_plate_mesh(50.0, 1.0, 4)
    assert mesh.num_elements == 32
    assert mesh.nodes.shape == (50, 3)
    assert mesh.elements.shape == (32, 6)
    labels = plateid.pattern_labels(mesh, "cross")
    assert set(labels) == {1, 2}


def test_energy_at_identity_and_along_paths():
    theta = np.array([1.8, 0, 0, 0, 0, 6.0])
    assert plateid.strain_energy(np.eye(3), theta) == pytest.approx(0.0, abs=1e-14)
    assert np.allclose(plateid.piola(np.eye(3), theta), 0.0, atol=1e-12)
    w = plateid.energy_along_path("UT", theta, 11)
    assert len(w) == 11 and w[0] == pytest.approx(0.0, abs=1e-14)
    assert all(b >= a for a, b in zip(w, w[1:]))
    assert len(plateid.feature_names()) == 6


def test_config_errors_are_python_exceptions():
    with pytest.raises(plateid.ConfigError, match="subsample.frac_free"):
        plateid.generate({"subsample.frac_free": "0.5"})
    assert isinstance(plateid.ConfigError("x"), plateid.Error)
    assert "mesh.n_divisions" in plateid.default_config()


def test_small_pipeline_recovers_two_segments():
    cfg = {
        "mesh.n_divisions": "10",
        "subsample.frac_free": "0.1",
        "sampler.chains": "2",
        "sampler.chain_length": "60",
        "sampler.burn_in": "20",
    }
    data = plateid.generate(cfg)
    assert data.clean.shape == (data.mesh.num_nodes, 3)
    assert set(data.boundary_forces) == {"x0", "xL", "y0", "yL"}
    seg = plateid.segment(data, cfg)
    assert seg.num_segments >= 1
    assert 0.0 <= plateid.misassignment(seg.labels, data.truth) <= 1.0
    ident = plateid.identify(data, seg, cfg)
    assert ident.theta_mean.shape == (6 * seg.num_segments,)
    assert (ident.draws >= 0.0).all()
