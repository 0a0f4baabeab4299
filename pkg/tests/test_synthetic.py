import numpy as np
import pytest
from scipy import ndimage
from scipy.special import erfc

from gpcellseg.segmentation import distance_transform, watershed
from gpcellseg.synthetic import (
    BraninParams,
    DiffusionConfig,
    PhantomConfig,
    add_noise,
    branin,
    branin_field,
    diffusion_field,
    phantom_cells,
    two_disc_phantom,
)

BRANIN_MIN = 0.39788735772973834  # 5 / (4 pi)


def test_branin_minimisers():
    assert branin(np.pi, 2.275) == pytest.approx(BRANIN_MIN, abs=1e-12)
    assert branin(-np.pi, 12.275) == pytest.approx(branin(np.pi, 2.275), abs=1e-6)


def test_branin_constant_when_a0_t1():
    f = branin_field(BraninParams(a=0.0, t=1.0, s=7.0), 20, 30)
    np.testing.assert_allclose(f, 7.0, rtol=0, atol=1e-12)


def test_branin_grid():
    f = branin_field(n1=16, n2=31)
    assert f.shape == (16, 31) and np.all(np.isfinite(f))
    assert f[0, 0] == pytest.approx(branin(-5.0, 0.0))
    assert f[-1, -1] == pytest.approx(branin(10.0, 15.0))
    with pytest.raises(ValueError):
        branin_field(n1=1)


def test_diffusion_initial_column():
    f = diffusion_field(DiffusionConfig(nx=50, nt=20))
    assert f[0, 0] == 1.0 and not f[1:, 0].any()
    assert np.all(f[0] == 1.0)


def test_diffusion_monotone_in_x():
    f = diffusion_field(DiffusionConfig(nx=80, nt=60))
    assert np.all(np.diff(f, axis=0) <= 1e-12)
    assert np.all(np.isfinite(f))


def test_diffusion_matches_erfc():
    cfg = DiffusionConfig(nt=201)
    f = diffusion_field(cfg)
    k = 10
    assert cfg.t[k] == pytest.approx(0.01)
    x = cfg.x[cfg.x < 0.5]
    exact = erfc(x / (2 * np.sqrt(cfg.D * cfg.t[k])))
    assert np.max(np.abs(f[: x.size, k] - exact)) < 0.01


def test_noise_identity_and_variance():
    clean = np.zeros((120, 100))
    assert np.array_equal(add_noise(clean, 0.0, seed=1), clean)
    noisy = add_noise(clean, 0.3, seed=2)
    assert np.var(noisy - clean, ddof=1) == pytest.approx(0.09, rel=0.1)


def test_noise_deterministic():
    clean = np.ones((10, 10))
    assert np.array_equal(add_noise(clean, 0.5, seed=3), add_noise(clean, 0.5, seed=3))
    with pytest.raises(ValueError):
        add_noise(clean, -1.0)


def test_phantom_empty():
    image, labels = phantom_cells(50, 50, 0, seed=1)
    assert labels.max() == 0 and image.std() == 0


@pytest.mark.parametrize("shape", ["disc", "blob"])
def test_phantom_twelve_objects(shape):
    image, labels = phantom_cells(200, 200, 12, shape, seed=11)
    assert labels.max() == 12 and len(np.unique(labels)) == 13
    assert image[labels > 0].min() > image[labels == 0].max()
    again = phantom_cells(200, 200, 12, shape, seed=11)
    assert np.array_equal(again[0], image) and np.array_equal(again[1], labels)


def test_phantom_touching_pairs():
    _, labels = phantom_cells(160, 160, 4, seed=2, config=PhantomConfig(overlap_pairs=2))
    assert labels.max() == 4
    # each pair shares a boundary
    assert ndimage.label(labels > 0, structure=np.ones((3, 3)))[1] == 2


def test_phantom_infeasible():
    with pytest.raises(RuntimeError):
        phantom_cells(40, 40, 20, seed=0)
    with pytest.raises(ValueError):
        phantom_cells(40, 40, 1, shape="square")


def test_two_disc_geometry():
    image, labels, centres = two_disc_phantom()
    d = distance_transform(image > 0.5)
    assert watershed(d).max() == 2
    assert labels.max() == 2
    # one saddle: along the centre line the distance dips once between the centres
    row = int(centres[0][0])
    c0, c1 = int(round(centres[0][1])), int(round(centres[1][1]))
    profile = d[row, c0:c1 + 1]
    interior_minima = [i for i in range(1, profile.size - 1)
                       if profile[i] <= profile[i - 1] and profile[i] <= profile[i + 1]]
    assert len(interior_minima) >= 1
    assert np.ptp(np.array(interior_minima)) <= 1
