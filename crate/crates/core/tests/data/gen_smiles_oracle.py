"""Regenerates smiles_oracle.jsonl with RDKit atom/bond/ring/H counts.

Run once with RDKit installed; the output is committed and the Rust tests
never call RDKit.
"""
import json
import sys

from rdkit import Chem

SMILES = [
    "C", "CC", "CCO", "CC(=O)O", "CC(=O)[O-]", "C1CC1", "C1CCCCC1", "c1ccccc1",
    "Cc1ccccc1", "Oc1ccccc1", "Nc1ccccc1", "c1ccncc1", "c1cc[nH]c1", "c1ccoc1",
    "c1ccsc1", "C=C", "C#C", "C#N", "CC#N", "O=C=O", "CCN(CC)CC", "CC(C)O",
    "CC(C)(C)O", "OCCO", "OC(=O)C(=O)O", "CC(=O)OC", "CC(=O)N", "CNC(=O)C",
    "CC=O", "CC(C)=O", "C[N+](=O)[O-]", "CS", "CSC", "CS(=O)(=O)C", "CS(=O)(=O)O",
    "OP(=O)(O)O", "COP(=O)(OC)OC", "FC(F)(F)F", "ClCCl", "ClC(Cl)(Cl)Cl",
    "CC(=O)Oc1ccccc1C(=O)O",
    "Cn1cnc2c1c(=O)n(C)c(=O)n2C",
    "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
    "CC(=O)Nc1ccc(O)cc1",
    "OC[C@H]1OC(O)[C@H](O)[C@@H](O)[C@@H]1O",
    "C[C@@H](C(=O)O)N",
    "N[C@@H](Cc1ccccc1)C(=O)O",
    "NCC(=O)O",
    "C(C(=O)O)S",
    "CC(C)C[C@H](N)C(=O)O",
    "c1ccc2ccccc2c1",
    "c1ccc2c(c1)ccc1ccccc12",
    "C1CCC2CCCCC2C1",
    "C1CC2CCC1C2",
    "C12C3C4C1C5C2C3C45",
    "c1ccc2[nH]ccc2c1",
    "O=C1CCCCC1",
    "C1COCCN1",
    "C1CCNCC1",
    "C1CCOC1",
    "O1CCOCC1",
    "CCOC(=O)C",
    "CCCCCCCC/C=C\\CCCCCCCC(=O)O",
    "C/C=C/C",
    "F/C=C/F",
    "[Na+].[Cl-]",
    "[K+].[O-]C(=O)C",
    "[NH4+]",
    "[13CH4]",
    "[2H]C([2H])([2H])[2H]",
    "[Mg+2]",
    "[Fe+3]",
    "[Zn+2].[O-]S(=O)(=O)[O-]",
    "[Se]",
    "c1cc[se]c1",
    "[Si](C)(C)(C)C",
    "B(O)(O)O",
    "OB(O)c1ccccc1",
    "C%10CC%10",
    "CC(C)(C)c1ccc(O)cc1",
    "CN1CCC[C@H]1c1cccnc1",
    "CN1C(=O)CN=C(c2ccccc2)c2cc(Cl)ccc12",
    "CC12CCC3C(CCC4=CC(=O)CCC34C)C1CCC2O",
    "OC(=O)c1ccccc1O",
    "COc1cc(C=O)ccc1O",
    "NC(N)=O",
    "C1=CC=CC=C1",
    "C1=CC=CN=C1",
    "N#CC#N",
    "CC(C)N=C=S",
    "C=CC=C",
    "C1CCCC1",
    "CC1=CC(=O)C=CC1=O",
    "O=S(=O)(O)O",
    "O=[N+]([O-])c1ccccc1",
    "Clc1ccc(cc1)Cl",
    "Brc1ccccc1",
    "CCOCC",
    "CCS",
    "CCSSCC",
]

MALFORMED = [
    ("C1CC", "UnmatchedRingClosure"),
    ("CC(C", "UnbalancedParenthesis"),
    ("C[Xz]C", "UnknownElement"),
    ("", "EmptyInput"),
]


def main():
    assert len(SMILES) == 100, len(SMILES)
    assert len(set(SMILES)) == 100
    params = Chem.SmilesParserParams()
    params.removeHs = False
    out = []
    for s in SMILES:
        mol = Chem.MolFromSmiles(s, params)
        if mol is None:
            sys.exit(f"rdkit rejected {s}")
        out.append({
            "smiles": s,
            "atoms": mol.GetNumAtoms(),
            "bonds": mol.GetNumBonds(),
            "rings": len(Chem.GetSSSR(mol)),
            "fragments": len(Chem.GetMolFrags(mol)),
            "total_h": sum(a.GetTotalNumHs() for a in mol.GetAtoms()),
            "charge": sum(a.GetFormalCharge() for a in mol.GetAtoms()),
            "valid": True,
        })
    for s, err in MALFORMED:
        assert Chem.MolFromSmiles(s) is None or s == ""
        out.append({"smiles": s, "valid": False, "error": err})
    with open("smiles_oracle.jsonl", "w") as f:
        for rec in out:
            f.write(json.dumps(rec) + "\n")


if __name__ == "__main__":
    main()
