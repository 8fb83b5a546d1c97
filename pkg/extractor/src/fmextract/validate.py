"""Cross-check an FMEB file against the manifest it was extracted from."""

from dataclasses import dataclass, field

from fmfusion.fmeb import read_fmeb

from .manifest import parse_manifest


@dataclass
class ValidationReport:
    dim_expected: int | None
    dim_found: int
    missing_in_fmeb: list = field(default_factory=list)
    extra_in_fmeb: list = field(default_factory=list)
    mismatches: list = field(default_factory=list)  # (utt, field, manifest_value, fmeb_value)

    @property
    def dim_ok(self):
        return self.dim_expected is None or self.dim_expected == self.dim_found

    @property
    def ok(self):
        return (self.dim_ok and not self.missing_in_fmeb
                and not self.extra_in_fmeb and not self.mismatches)

    def lines(self):
        out = []
        if not self.dim_ok:
            out.append(f"dim mismatch: expected {self.dim_expected}, found {self.dim_found}")
        for utt in self.missing_in_fmeb:
            out.append(f"missing from fmeb: {utt}")
        for utt in self.extra_in_fmeb:
            out.append(f"not in manifest: {utt}")
        for utt, fieldname, mval, fval in self.mismatches:
            out.append(f"{utt}: {fieldname} is {fval} in fmeb but {mval} in manifest")
        return out


def validate_fmeb_against_manifest(fmeb_path, manifest_path, expected_dim=None):
    """Compare ids, labels, splits, and optionally the vector dim."""
    es = read_fmeb(fmeb_path)
    rows = parse_manifest(manifest_path)
    report = ValidationReport(dim_expected=expected_dim, dim_found=es.dim)
    by_id = {r.utterance_id: r for r in es.records}
    manifest_ids = set()
    for row in rows:
        manifest_ids.add(row.utterance_id)
        rec = by_id.get(row.utterance_id)
        if rec is None:
            report.missing_in_fmeb.append(row.utterance_id)
            continue
        if rec.label != row.label:
            report.mismatches.append((row.utterance_id, "label", row.label, rec.label))
        if rec.split != row.split:
            report.mismatches.append((row.utterance_id, "split", row.split, rec.split))
    for utt in by_id:
        if utt not in manifest_ids:
            report.extra_in_fmeb.append(utt)
    report.missing_in_fmeb.sort()
    report.extra_in_fmeb.sort()
    return report
