"""Unit tests for the fuzzy C-means codebook update."""

import math

import numpy as np
import pytest
import torch

from src.data.synthetic import gaussian_blobs
from src.nn.fcm import FuzzyCodebookUpdate, fcm_update, membership, step_size
from src.nn.vqvae import CodebookSet, kmeans_plus_plus

BLOB_MEANS = np.array([[0.0, 0.0], [5.0, 0.0], [0.0, 5.0], [5.0, 5.0]])
BLOB_SIGMA = 0.3


class TestMembership:
    """Test fuzzy memberships."""

    def test_rows_sum_to_one(self, generator):
        """Memberships of 10,000 random latents over random codebooks sum to one."""
        for _ in range(10):
            codebook = torch.randn(32, 4, dtype=torch.float64, generator=generator)
            z = 3 * torch.randn(1000, 4, dtype=torch.float64, generator=generator)
            f = membership(z, codebook)
            assert f.shape == (1000, 32)
            assert (f >= 0).all()
            assert torch.allclose(f.sum(-1), torch.ones(1000, dtype=torch.float64), rtol=0, atol=1e-9)

    def test_equidistant_vectors(self):
        """A latent equidistant from every vector gives 1/N each."""
        codebook = torch.tensor([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], dtype=torch.float64)
        f = membership(torch.zeros(1, 2, dtype=torch.float64), codebook)
        assert torch.allclose(f, torch.full((1, 4), 0.25, dtype=torch.float64), rtol=0, atol=1e-12)

    def test_closer_vectors_weigh_more(self):
        """Membership is proportional to inverse squared distance."""
        codebook = torch.tensor([[1.0], [2.0]], dtype=torch.float64)
        f = membership(torch.zeros(1, 1, dtype=torch.float64), codebook)
        # d^-2 = 1 and 1/4
        assert torch.allclose(f, torch.tensor([[0.8, 0.2]], dtype=torch.float64))

    def test_coincident_vector_takes_everything(self):
        """A latent on a codebook vector gives it the whole membership."""
        codebook = torch.tensor([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]], dtype=torch.float64)
        f = membership(torch.tensor([[1.0, 1.0]], dtype=torch.float64), codebook)
        assert f.tolist() == [[0.0, 1.0, 0.0]]

    def test_coincident_ties_split(self):
        """Duplicate vectors at the latent share the membership equally."""
        codebook = torch.tensor([[0.5], [0.5], [3.0]], dtype=torch.float64)
        f = membership(torch.tensor([[0.5]], dtype=torch.float64), codebook)
        assert f.tolist() == [[0.5, 0.5, 0.0]]

    def test_width_mismatch(self):
        """Widths must agree."""
        with pytest.raises(ValueError):
            membership(torch.zeros(2, 3), torch.zeros(4, 2))


class TestStepSize:
    """Test the use-rate driven step size."""

    def test_unused_vector(self):
        """R = 0 gives exp(-1e-3)."""
        assert abs(step_size(torch.tensor(0.0), 256, 0.99).item() - math.exp(-1e-3)) <= 1e-12

    def test_strictly_decreasing(self):
        """Strictly decreasing over a grid where the step is representable."""
        rates = torch.linspace(0.0, 2.5e-3, 1000, dtype=torch.float64)
        steps = step_size(rates, 256, 0.99)
        assert (steps[1:] < steps[:-1]).all()

    def test_non_increasing_and_bounded(self):
        """Over the full rate range the step never increases and stays in [0, 1)."""
        rates = torch.linspace(0.0, 1.0, 1000, dtype=torch.float64)
        steps = step_size(rates, 256, 0.99)
        assert (steps[1:] <= steps[:-1]).all()
        assert (steps >= 0).all() and (steps < 1).all()


class TestFCMUpdate:
    """Test one FCM step."""

    def test_single_vector_moves_to_batch_mean(self):
        """With one vector every latent has full membership, the target is the batch mean."""
        codebook = torch.tensor([[0.0, 0.0]], dtype=torch.float64)
        z = torch.tensor([[1.0, 2.0], [3.0, 4.0]], dtype=torch.float64)
        updated = fcm_update(codebook, z, torch.zeros(1, dtype=torch.float64))
        alpha = math.exp(-1e-3)
        assert torch.allclose(updated, alpha * torch.tensor([[2.0, 3.0]], dtype=torch.float64))

    def test_input_untouched(self, generator):
        """The codebook argument is not modified in place."""
        codebook = torch.randn(8, 3, dtype=torch.float64, generator=generator)
        before = codebook.clone()
        fcm_update(codebook, torch.randn(16, 3, dtype=torch.float64, generator=generator),
                   torch.zeros(8, dtype=torch.float64))
        assert torch.equal(codebook, before)

    def test_busy_vector_stays(self, generator):
        """A vector with a high use rate gets a vanishing step."""
        codebook = torch.randn(4, 2, dtype=torch.float64, generator=generator)
        rates = torch.tensor([1.0, 0.0, 0.0, 0.0], dtype=torch.float64)
        updated = fcm_update(codebook, torch.randn(32, 2, dtype=torch.float64, generator=generator), rates)
        assert torch.equal(updated[0], codebook[0])
        assert not torch.equal(updated[1], codebook[1])

    def test_every_vector_moves(self, generator):
        """Unlike hard assignment, vectors nobody selects still move."""
        codebook = torch.tensor([[0.0, 0.0], [100.0, 100.0]], dtype=torch.float64)
        z = 0.1 * torch.randn(20, 2, dtype=torch.float64, generator=generator)
        updated = fcm_update(codebook, z, torch.zeros(2, dtype=torch.float64))
        assert (updated[1] - codebook[1]).abs().sum() > 1.0

    def test_centre_weighted_by_squared_membership(self):
        """The target is the f^2-weighted mean of the batch."""
        codebook = torch.tensor([[0.0], [3.0]], dtype=torch.float64)
        z = torch.tensor([[1.0], [2.0]], dtype=torch.float64)
        f = membership(z, codebook)
        expected = (f.pow(2).t() @ z) / f.pow(2).sum(0).unsqueeze(-1)
        updated = fcm_update(codebook, z, torch.zeros(2, dtype=torch.float64))
        alpha = math.exp(-1e-3)
        assert torch.allclose(updated, (1 - alpha) * codebook + alpha * expected, rtol=0, atol=1e-12)
        # z = 1 holds 0.8 of vector 0, so its centre leans further toward 1 than the plain f-weighted mean
        assert updated[0].item() < alpha * ((f[:, 0] @ z[:, 0]) / f[:, 0].sum()).item()

    def test_stays_in_convex_hull(self, generator):
        """Batches inside a box keep every vector in the hull of its old position and the box."""
        low, high = torch.tensor([-1.0, 2.0], dtype=torch.float64), torch.tensor([1.0, 3.0], dtype=torch.float64)
        for _ in range(50):
            codebook = 4 * torch.randn(16, 2, dtype=torch.float64, generator=generator)
            z = low + (high - low) * torch.rand(64, 2, dtype=torch.float64, generator=generator)
            rates = torch.rand(16, dtype=torch.float64, generator=generator) * 1e-5
            updated = fcm_update(codebook, z, rates)

            alpha = step_size(rates, 16).unsqueeze(-1)
            # The update is (1 - alpha) e + alpha c with c inside the box
            centre = torch.where(alpha > 0, (updated - (1 - alpha) * codebook) / alpha.clamp_min(1e-300), low)
            assert ((centre >= low - 1e-9) & (centre <= high + 1e-9)).all()
            assert ((alpha >= 0) & (alpha <= 1)).all()
            lo = torch.minimum(codebook, low)
            hi = torch.maximum(codebook, high)
            assert ((updated >= lo - 1e-9) & (updated <= hi + 1e-9)).all()

    def test_empty_batch(self):
        """An empty batch returns an unchanged copy."""
        codebook = torch.ones(3, 2, dtype=torch.float64)
        updated = fcm_update(codebook, torch.zeros(0, 2, dtype=torch.float64), torch.zeros(3, dtype=torch.float64))
        assert torch.equal(updated, codebook)


class TestFuzzyCodebookUpdate:
    """Test the update applied to a whole CodebookSet."""

    def test_enabled_updates_and_records(self, generator):
        """Enabled: vectors move, usage is recorded, one mean step per codebook."""
        codebooks = CodebookSet(num_codebooks=2, num_vectors=4, dim=3, dtype=torch.float64)
        with torch.no_grad():
            codebooks.vectors.normal_(generator=generator)
        before = codebooks.vectors.clone()

        update = FuzzyCodebookUpdate(codebooks, enabled=True)
        z_e = torch.randn(10, 6, dtype=torch.float64, generator=generator)
        labels = torch.randint(0, 4, (10, 2), generator=generator)
        steps = update(z_e, labels)

        assert steps.shape == (2,)
        assert not torch.equal(codebooks.vectors, before)
        assert codebooks.counts.sum().item() == 20
        assert update.updates == 1

    def test_disabled_only_records(self, generator):
        """Disabled: vectors stay, usage still counts."""
        codebooks = CodebookSet(num_codebooks=2, num_vectors=4, dim=3, dtype=torch.float64)
        before = codebooks.vectors.clone()
        update = FuzzyCodebookUpdate(codebooks, enabled=False)
        steps = update(torch.randn(10, 6, dtype=torch.float64), torch.randint(0, 4, (10, 2)))
        assert steps is None
        assert torch.equal(codebooks.vectors, before)
        assert codebooks.counts.sum().item() == 20

    def test_converges_on_gaussian_blobs(self, rng, generator):
        """Seeded from the data, four vectors end within 3 sigma of four distinct cluster means."""
        points = torch.as_tensor(gaussian_blobs(BLOB_MEANS, BLOB_SIGMA, 500, rng))
        codebooks = CodebookSet(num_codebooks=1, num_vectors=4, dim=2, dtype=torch.float64)
        with torch.no_grad():
            codebooks.vectors[0].copy_(kmeans_plus_plus(points, 4, generator))

        update = FuzzyCodebookUpdate(codebooks)
        for _ in range(500):
            batch = points[torch.randint(points.shape[0], (128,), generator=generator)]
            labels = torch.cdist(batch, codebooks.vectors[0]).argmin(-1, keepdim=True)
            update(batch, labels)

        distances = torch.cdist(codebooks.vectors[0], torch.as_tensor(BLOB_MEANS))
        nearest = distances.argmin(-1)
        assert sorted(nearest.tolist()) == [0, 1, 2, 3]
        assert (distances.min(-1).values <= 3 * BLOB_SIGMA).all()

    def test_unused_vector_moves_onto_data(self, rng, generator):
        """A vector stranded away from the data keeps moving until it sits among the latents."""
        points = torch.as_tensor(gaussian_blobs(BLOB_MEANS, BLOB_SIGMA, 500, rng))
        codebooks = CodebookSet(num_codebooks=1, num_vectors=5, dim=2, dtype=torch.float64)
        with torch.no_grad():
            codebooks.vectors[0, :4].copy_(torch.as_tensor(BLOB_MEANS))
            codebooks.vectors[0, 4] = torch.tensor([40.0, -40.0], dtype=torch.float64)

        update = FuzzyCodebookUpdate(codebooks)
        for _ in range(50):
            batch = points[torch.randint(points.shape[0], (128,), generator=generator)]
            update(batch, torch.cdist(batch, codebooks.vectors[0]).argmin(-1, keepdim=True))

        stray = codebooks.vectors[0, 4]
        assert torch.cdist(stray[None], points).min().item() < 1.0
