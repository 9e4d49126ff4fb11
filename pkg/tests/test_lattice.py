from collections import deque

import numpy as np
import pytest

from lattice_relax.lattice import (
    KEEP_ALL,
    build_component_graph,
    default_epsilon,
    edge_mask,
    full_graph,
    laplacian_filter,
    neighbors,
)
from lattice_relax.types import DOWN, LEFT, RIGHT, UP, ComponentGraph, FilterResponse, Image, InvalidInputError


def _bfs_labels(graph: ComponentGraph) -> np.ndarray:
    """Independent flood fill over kept edges, numbered by first pixel."""
    height, width = graph.height, graph.width
    labels = -np.ones((height, width), dtype=np.int64)
    steps = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}
    current = 0
    for r in range(height):
        for c in range(width):
            if labels[r, c] >= 0:
                continue
            labels[r, c] = current
            queue = deque([(r, c)])
            while queue:
                y, x = queue.popleft()
                for direction, (dy, dx) in steps.items():
                    if graph.edges[y, x, direction] and labels[y + dy, x + dx] < 0:
                        labels[y + dy, x + dx] = current
                        queue.append((y + dy, x + dx))
            current += 1
    return labels


class TestLaplacianFilter:

    def test_constant_image_is_zero(self):
        response = laplacian_filter(Image(np.full((5, 7), 3.5)))
        np.testing.assert_array_equal(response.data, 0.0)

    def test_center_impulse(self):
        data = np.zeros((3, 3))
        data[1, 1] = 1.0
        response = laplacian_filter(Image(data)).data
        expected = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])
        np.testing.assert_allclose(response, expected)

    def test_vertical_step_touches_two_columns(self):
        data = np.zeros((6, 8))
        data[:, 4:] = 10.0
        response = laplacian_filter(Image(data)).data
        nonzero_columns = sorted(set(np.nonzero(response)[1].tolist()))
        assert nonzero_columns == [3, 4]
        np.testing.assert_allclose(response[:, 3], 10.0)
        np.testing.assert_allclose(response[:, 4], -10.0)

    def test_uses_channel_mean(self):
        data = np.zeros((4, 4, 2))
        data[1, 1, 0] = 2.0
        response = laplacian_filter(Image(data)).data
        assert response[1, 1] == pytest.approx(-4.0)

    def test_rejects_tiny_image(self):
        with pytest.raises(InvalidInputError):
            Image(np.zeros((1, 5)))


class TestComponentGraph:

    def test_constant_response_single_component(self):
        graph = build_component_graph(FilterResponse(np.ones((4, 5))), epsilon=0.0)
        assert graph.n_components == 1
        assert graph.edges[1:-1, 1:-1].all()

    def test_step_splits_in_two(self):
        data = np.zeros((4, 6))
        data[:, 3:] = 5.0
        graph = build_component_graph(FilterResponse(data), epsilon=1.0)
        assert graph.n_components == 2
        assert not graph.edges[:, 2, RIGHT].any()
        assert not graph.edges[:, 3, LEFT].any()
        np.testing.assert_array_equal(graph.labels[:, :3], 0)
        np.testing.assert_array_equal(graph.labels[:, 3:], 1)

    def test_keep_all_sentinel(self, rng):
        graph = build_component_graph(FilterResponse(rng.normal(0, 100, size=(6, 6))), epsilon=KEEP_ALL)
        assert graph.n_components == 1

    def test_off_grid_edges_never_kept(self, rng):
        graph = build_component_graph(FilterResponse(rng.normal(size=(5, 4))), epsilon=KEEP_ALL)
        assert not graph.edges[0, :, UP].any()
        assert not graph.edges[-1, :, DOWN].any()
        assert not graph.edges[:, 0, LEFT].any()
        assert not graph.edges[:, -1, RIGHT].any()

    def test_edge_symmetry(self, rng):
        for _ in range(10):
            graph = build_component_graph(FilterResponse(rng.normal(size=(7, 9))), epsilon=0.8)
            for (a, b) in graph.kept_edges():
                assert (b, a) in graph.kept_edges()

    def test_labels_match_breadth_first_search(self, rng):
        for size in (2, 5, 9, 16):
            response = FilterResponse(rng.integers(0, 3, size=(size, size)).astype(float))
            graph = build_component_graph(response, epsilon=0.5)
            np.testing.assert_array_equal(graph.labels, _bfs_labels(graph))

    def test_monotone_in_epsilon(self, rng):
        response = FilterResponse(rng.normal(size=(8, 8)))
        smaller = build_component_graph(response, epsilon=0.3).kept_edges()
        larger = build_component_graph(response, epsilon=0.9).kept_edges()
        assert smaller <= larger

    def test_default_epsilon_is_relative(self):
        data = np.array([[0.0, 2.0], [4.0, 10.0]])
        assert default_epsilon(data, 0.1) == pytest.approx(1.0)
        graph = build_component_graph(FilterResponse(data))
        assert graph.n_components == 4

    def test_negative_epsilon_rejected(self):
        with pytest.raises(InvalidInputError):
            edge_mask(np.zeros((3, 3)), -1.0)

    def test_asymmetric_mask_rejected(self):
        edges = full_graph(2, 2).edges.copy()
        edges[0, 0, RIGHT] = False
        with pytest.raises(InvalidInputError):
            ComponentGraph(edges=edges, labels=np.zeros((2, 2)))

    def test_batched_mask_matches_single(self, rng):
        stack = rng.normal(size=(3, 6, 6))
        batched = edge_mask(stack, 0.7)
        for index in range(3):
            np.testing.assert_array_equal(batched[index], edge_mask(stack[index], 0.7))


class TestNeighbors:

    def test_interior(self):
        result = neighbors((1, 2), 4, 4)
        assert len(result) == 5
        assert result[0] == (1, 2)

    def test_corner(self):
        assert sorted(neighbors((0, 0), 4, 4)) == [(0, 0), (0, 1), (1, 0)]

    def test_edge_pixel(self):
        assert len(neighbors((0, 2), 4, 4)) == 4

    def test_single_column(self):
        assert len(neighbors((2, 0), 5, 1)) == 3

    def test_out_of_bounds(self):
        with pytest.raises(InvalidInputError):
            neighbors((4, 0), 4, 4)
