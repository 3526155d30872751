import numpy as np
import pytest

from ampr.mask_core import Box, label_components
from ampr.segmenter import (
    MockVideoSegmenter,
    PointPrompt,
    PromptSet,
    parse_mock_spec,
    split_gt_by_id,
)


def brute_erode(m, r):
    h, w = m.shape
    out = np.zeros_like(m)
    for y in range(h):
        for x in range(w):
            if y - r < 0 or y + r >= h or x - r < 0 or x + r >= w:
                continue
            if m[y - r:y + r + 1, x - r:x + r + 1].all():
                out[y, x] = 1
    return out


def rect_gt(t_count=6, shape=(20, 24), pos=(4, 5), size=(8, 10)):
    """One static rectangular target across t_count frames."""
    masks = []
    for _ in range(t_count):
        m = np.zeros(shape, dtype=np.uint8)
        m[pos[0]:pos[0] + size[0], pos[1]:pos[1] + size[1]] = 1
        masks.append(m)
    return [masks]


def test_gt_oracle_returns_exact_component():
    gt = rect_gt()
    mock = MockVideoSegmenter(gt, kind="gt-oracle")
    s = mock.session(1)
    out = s.segment_frame(2, [PointPrompt(8, 6)])
    assert np.array_equal(out, gt[0][2] * 255)


def test_gt_oracle_miss_returns_empty():
    mock = MockVideoSegmenter(rect_gt(), kind="gt-oracle")
    out = mock.session(1).segment_frame(0, [PointPrompt(0, 0)])
    assert out.sum() == 0


def test_eroding_without_box_matches_brute_force_erosion():
    gt = rect_gt()
    mock = MockVideoSegmenter(gt, kind="eroding", erosion=2)
    out = mock.session(1).segment_frame(0, [PointPrompt(8, 6)])
    assert np.array_equal((out > 127).astype(np.uint8), brute_erode(gt[0][0], 2))


def test_eroding_box_covering_object_releases_full_component():
    gt = rect_gt()
    mock = MockVideoSegmenter(gt, kind="eroding", erosion=2)
    out = mock.session(1).segment_frame(0, [PointPrompt(8, 6)], box=Box(0, 0, 23, 19))
    assert np.array_equal(out, gt[0][0] * 255)


def test_eroding_box_monotone():
    gt = rect_gt()
    mock = MockVideoSegmenter(gt, kind="eroding", erosion=2)
    s = mock.session(1)
    prev = None
    for x1 in range(8, 24, 3):
        out = (s.segment_frame(0, [PointPrompt(8, 6)], box=Box(0, 0, x1, 19)) > 127)
        if prev is not None:
            assert (prev <= out).all()
        prev = out


def test_mock_determinism():
    gt = rect_gt()
    for kind in MockVideoSegmenter.KINDS:
        a = MockVideoSegmenter(gt, kind=kind, seed=7).session(1)
        b = MockVideoSegmenter(gt, kind=kind, seed=7).session(1)
        pts = [PointPrompt(8, 6)]
        assert np.array_equal(a.segment_frame(3, pts), b.segment_frame(3, pts))
        ps = [PromptSet(2, 1, (PointPrompt(8, 6),))]
        ma, mb = a.propagate_video(ps), b.propagate_video(ps)
        assert all(np.array_equal(x, y) for x, y in zip(ma, mb))


def test_propagate_gt_oracle_full_sequence():
    gt = rect_gt()
    mock = MockVideoSegmenter(gt, kind="gt-oracle")
    masks = mock.session(1).propagate_video([PromptSet(0, 1, (PointPrompt(8, 6),))])
    assert len(masks) == 6
    for m, g in zip(masks, gt[0]):
        assert np.array_equal(m, g * 255)


def test_propagate_dropout_frames():
    gt = rect_gt()
    mock = MockVideoSegmenter(gt, kind="gt-oracle", dropout_frames=[2, 4])
    masks = mock.session(1).propagate_video([PromptSet(0, 1, (PointPrompt(8, 6),))])
    for t, m in enumerate(masks):
        if t in (2, 4):
            assert m.sum() == 0
        else:
            assert np.array_equal(m, gt[0][t] * 255)


def test_propagate_eroding_full_on_prompted_eroded_elsewhere():
    gt = rect_gt()
    mock = MockVideoSegmenter(gt, kind="eroding", erosion=2)
    big = Box(0, 0, 23, 19)
    masks = mock.session(1).propagate_video(
        [PromptSet(1, 1, (PointPrompt(8, 6),), box=big),
         PromptSet(4, 1, (PointPrompt(8, 6),), box=big)])
    eroded = brute_erode(gt[0][0], 2)
    for t, m in enumerate(masks):
        expect = gt[0][t] if t in (1, 4) else eroded
        assert np.array_equal((m > 127).astype(np.uint8), expect)


def test_propagate_validations():
    mock = MockVideoSegmenter(rect_gt(), kind="gt-oracle")
    s = mock.session(1)
    with pytest.raises(ValueError):
        s.propagate_video([])
    with pytest.raises(ValueError):
        s.propagate_video([PromptSet(0, 1, (PointPrompt(8, 6),)),
                           PromptSet(0, 1, (PointPrompt(8, 6),))])
    with pytest.raises(ValueError):
        s.propagate_video([PromptSet(0, 1, (PointPrompt(8, 6),)),
                           PromptSet(1, 2, (PointPrompt(8, 6),))])


def test_segment_frame_validations():
    s = MockVideoSegmenter(rect_gt(), kind="gt-oracle").session(1)
    with pytest.raises(ValueError):
        s.segment_frame(99, [PointPrompt(8, 6)])
    with pytest.raises(ValueError):
        s.segment_frame(0, [PointPrompt(99, 6)])
    with pytest.raises(ValueError):
        s.segment_frame(0, [])


def test_two_target_identification():
    shape = (20, 20)
    a = np.zeros(shape, dtype=np.uint8)
    a[2:6, 2:6] = 1
    b = np.zeros(shape, dtype=np.uint8)
    b[12:18, 12:18] = 1
    gt = [[a.copy() for _ in range(4)], [b.copy() for _ in range(4)]]
    mock = MockVideoSegmenter(gt, kind="gt-oracle")
    masks = mock.session(2).propagate_video([PromptSet(0, 2, (PointPrompt(14, 14),))])
    for m in masks:
        assert np.array_equal((m > 127).astype(np.uint8), b)


def test_call_counter():
    mock = MockVideoSegmenter(rect_gt(), kind="gt-oracle")
    s = mock.session(1)
    for _ in range(5):
        s.segment_frame(0, [PointPrompt(8, 6)])
    assert mock.segment_calls == 5


def test_parse_mock_spec():
    assert parse_mock_spec("gt-oracle") == {"kind": "gt-oracle"}
    assert parse_mock_spec("eroding:erosion=3,seed=5") == {
        "kind": "eroding", "erosion": 3, "seed": 5}
    assert parse_mock_spec("gt-oracle:dropout_frames=2+4") == {
        "kind": "gt-oracle", "dropout_frames": [2, 4]}
    with pytest.raises(ValueError):
        parse_mock_spec("nope")
    with pytest.raises(ValueError):
        parse_mock_spec("eroding:wat=1")


def test_split_gt_by_id():
    m0 = np.zeros((6, 6), dtype=np.uint8)
    m0[0:2, 0:2] = 1
    m0[4:6, 4:6] = 2
    m1 = np.zeros((6, 6), dtype=np.uint8)
    m1[0:2, 1:3] = 1
    per_target = split_gt_by_id([m0, m1])
    assert len(per_target) == 2
    assert per_target[0][0].sum() == 4 and per_target[1][0].sum() == 4
    assert per_target[1][1].sum() == 0
    assert len(label_components(per_target[0][0])) == 1
