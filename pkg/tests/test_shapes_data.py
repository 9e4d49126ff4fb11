import numpy as np
import pytest
from matplotlib.path import Path as PolygonPath
from scipy import ndimage, stats
from scipy.spatial import ConvexHull
from skimage.measure import perimeter

from lattice_relax.seeding import stream
from lattice_relax.shapes_data import (
    CIRCLE,
    NUM_LABELS,
    SHAPE_CLASSES,
    NoiseSpec,
    _sample_frame,
    class_index,
    corrupt,
    generate_dataset,
    generate_instance,
    generate_polygon,
    load_dataset,
    main,
    parse_size,
    polygon_vertices,
    save_dataset,
)
from lattice_relax.types import Image, InvalidInputError


class TestShapeClasses:

    def test_twelve_classes(self):
        assert len(set(SHAPE_CLASSES)) == 12
        assert NUM_LABELS == 13

    def test_labels(self):
        assert class_index(3) == 1
        assert class_index(CIRCLE) == 12
        with pytest.raises(InvalidInputError):
            class_index(14)


class TestGeneratePolygon:

    @pytest.mark.parametrize("cls", SHAPE_CLASSES)
    def test_mask_and_image_agree(self, cls):
        instance = generate_polygon(cls, 64, 64, stream(17))
        label = class_index(cls)
        assert set(np.unique(instance.mask).tolist()) == {0, label}
        np.testing.assert_array_equal(instance.mask == label, instance.image.data[:, :, 0] == 255.0)
        _, regions = ndimage.label(instance.mask > 0)
        assert regions == 1

    def test_same_stream_same_instance(self):
        first = generate_polygon(7, 48, 40, stream(3))
        second = generate_polygon(7, 48, 40, stream(3))
        np.testing.assert_array_equal(first.mask, second.mask)
        np.testing.assert_array_equal(first.image.data, second.image.data)

    def test_polygon_fill_matches_vertices(self):
        for seed in range(30):
            for sides in range(3, 9):
                rng = stream(seed, sides)
                cx, cy, radius = _sample_frame(128, 128, rng)
                vertices = polygon_vertices(sides, cx, cy, radius, rng)
                instance = generate_polygon(sides, 128, 128, stream(seed, sides))
                rows, cols = np.mgrid[0:128, 0:128]
                centers = np.stack([cols.ravel(), rows.ravel()], axis=1)
                inside = PolygonPath(vertices).contains_points(centers).reshape(128, 128)
                shape = instance.mask > 0
                overlap = (inside & shape).sum() / (inside | shape).sum()
                assert overlap >= 0.8

    def test_triangle_vertices_form_triangle(self):
        rng = stream(5)
        vertices = polygon_vertices(3, 32.0, 32.0, 10.0, rng)
        assert vertices.shape == (3, 2)
        distances = np.hypot(vertices[:, 0] - 32.0, vertices[:, 1] - 32.0)
        assert np.all((distances >= 8.5 - 1e-9) & (distances <= 10.0 + 1e-9))

    @pytest.mark.parametrize("sides", range(3, 9))
    def test_hull_recovers_side_count(self, sides):
        rng = stream(sides)
        for _ in range(300):
            cx, cy, radius = _sample_frame(64, 64, rng)
            vertices = polygon_vertices(sides, cx, cy, radius, rng)
            assert len(ConvexHull(vertices).vertices) == sides

    @pytest.mark.parametrize("sides", range(9, 14))
    def test_hull_of_many_sided_polygons(self, sides):
        rng = stream(sides)
        counts = []
        for _ in range(300):
            cx, cy, radius = _sample_frame(64, 64, rng)
            counts.append(len(ConvexHull(polygon_vertices(sides, cx, cy, radius, rng)).vertices))
        assert max(counts) <= sides
        assert np.mean(np.equal(counts, sides)) > 0.5

    def test_circle_is_round(self):
        for seed in range(10):
            instance = generate_polygon(CIRCLE, 128, 128, stream(seed))
            shape = instance.mask > 0
            area = shape.sum()
            ratio = 4 * np.pi * area / perimeter(shape) ** 2
            assert ratio >= 0.9

    def test_small_canvas_rejected(self):
        with pytest.raises(InvalidInputError):
            generate_polygon(4, 8, 64, stream(0))


class TestGenerateDataset:

    def test_empty(self):
        assert generate_dataset(0, 32, 32, seed=1) == []

    def test_negative_size(self):
        with pytest.raises(InvalidInputError):
            generate_dataset(-1, 32, 32, seed=1)

    def test_deterministic(self):
        first = generate_dataset(5, 32, 32, seed=11)
        second = generate_dataset(5, 32, 32, seed=11)
        for a, b in zip(first, second):
            assert a.shape_class == b.shape_class and a.seed == b.seed
            np.testing.assert_array_equal(a.mask, b.mask)

    def test_seeds_differ(self):
        first = generate_dataset(10, 32, 32, seed=1)
        second = generate_dataset(10, 32, 32, seed=2)
        assert any(not np.array_equal(a.mask, b.mask) for a, b in zip(first, second))

    def test_prefix_stable(self):
        short = generate_dataset(3, 32, 32, seed=4)
        long = generate_dataset(6, 32, 32, seed=4)
        for a, b in zip(short, long):
            np.testing.assert_array_equal(a.mask, b.mask)

    def test_instance_matches_its_seed(self):
        instance = generate_dataset(4, 32, 32, seed=9)[2]
        again = generate_instance(instance.seed, 32, 32)
        np.testing.assert_array_equal(instance.mask, again.mask)

    def test_classes_uniform(self):
        instances = generate_dataset(1200, 64, 64, seed=7)
        counts = np.array([sum(1 for inst in instances if inst.shape_class == cls) for cls in SHAPE_CLASSES])
        assert counts.sum() == 1200
        statistic = ((counts - 100.0) ** 2 / 100.0).sum()
        assert statistic < stats.chi2.ppf(0.999, df=11)


class TestCorrupt:

    def test_zero_noise_identity(self, rng):
        image = Image(rng.uniform(0, 255, size=(16, 16)))
        np.testing.assert_array_equal(corrupt(image, NoiseSpec(0.0), rng).data, image.data)

    def test_standard_deviation(self):
        noisy = corrupt(Image(np.zeros((128, 128))), NoiseSpec(10.0), stream(2))
        assert 9.5 <= noisy.data.std(ddof=1) <= 10.5

    def test_no_clamping(self):
        noisy = corrupt(Image(np.zeros((64, 64))), NoiseSpec(50.0), stream(2))
        assert noisy.data.min() < 0.0

    def test_mask_untouched(self):
        instance = generate_instance(123, 32, 32)
        before = instance.mask.copy()
        corrupt(instance.image, NoiseSpec(30.0), stream(1))
        np.testing.assert_array_equal(instance.mask, before)

    def test_negative_noise(self):
        with pytest.raises(InvalidInputError):
            NoiseSpec(-1.0)


class TestPersistence:

    def test_round_trip(self, tmp_path):
        instances = generate_dataset(4, 24, 20, seed=3)
        save_dataset(instances, tmp_path)
        assert (tmp_path / "images" / "0003.pgm").exists()
        assert (tmp_path / "manifest.csv").read_text().splitlines()[0] == "index,class,seed"
        loaded = load_dataset(tmp_path)
        assert len(loaded) == 4
        for original, restored in zip(instances, loaded):
            assert restored.shape_class == original.shape_class
            assert restored.seed == original.seed
            np.testing.assert_array_equal(restored.mask, original.mask)
            np.testing.assert_array_equal(restored.image.data, original.image.data)

    def test_float_copy_keeps_noise(self, tmp_path):
        instance = generate_instance(5, 16, 16)
        noisy = corrupt(instance.image, NoiseSpec(40.0), stream(8))
        save_dataset([type(instance)(noisy, instance.mask, instance.shape_class, instance.seed)], tmp_path)
        restored = load_dataset(tmp_path)[0].image.data
        np.testing.assert_allclose(restored, noisy.data.astype(np.float32), rtol=0, atol=0)


class TestShapesGenCli:

    def test_parse_size(self):
        assert parse_size("64x32") == (64, 32)

    def test_writes_dataset(self, tmp_path):
        main(["--n", "3", "--size", "20x20", "--seed", "5", "--out", str(tmp_path)])
        assert len(list((tmp_path / "masks").glob("*.pgm"))) == 3
        assert len(load_dataset(tmp_path)) == 3
