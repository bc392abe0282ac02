from bearguard.fixture import bundled_fixture_paths, load_bundled_fixture, write_fixture


def test_regenerated_fixture_matches_bundled(tmp_path):
    new_preds, new_gt = write_fixture(tmp_path)
    preds, gt = bundled_fixture_paths()
    assert new_preds.read_bytes() == preds.read_bytes()
    assert new_gt.read_bytes() == gt.read_bytes()


def test_bundled_fixture_shape():
    preds, gts = load_bundled_fixture()
    n_gt = sum(len(d) for _, d in gts)
    assert n_gt == 3000
    assert {d.object_class.value for _, ds in gts for d in ds} == {"Bear", "Yak", "TibetanMastiff"}
