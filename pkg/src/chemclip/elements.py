"""Periodic-table lookups used by the parser and featurizers."""

SYMBOLS = (
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni "
    "Cu Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe "
    "Cs Ba La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg "
    "Tl Pb Bi Po At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr Rf Db Sg "
    "Bh Hs Mt Ds Rg Cn Nh Fl Mc Lv Ts Og"
).split()

ATOMIC_NUMBER = {sym: z for z, sym in enumerate(SYMBOLS, start=1)}

# Daylight default valences for the organic subset (lowest allowed state).
DEFAULT_VALENCE = {"B": 3, "C": 4, "N": 3, "O": 2, "P": 3, "S": 2,
                   "F": 1, "Cl": 1, "Br": 1, "I": 1}

ORGANIC_SUBSET = frozenset(DEFAULT_VALENCE)
AROMATIC_ORGANIC = {"b": "B", "c": "C", "n": "N", "o": "O", "p": "P", "s": "S"}
# lowercase symbols accepted inside brackets
AROMATIC_BRACKET = {**AROMATIC_ORGANIC, "se": "Se", "as": "As", "te": "Te"}

# Metals carried by the inorganic branch, alphabetical (one-hot order).
METALS = ("Au", "Co", "Cu", "Ir", "Os", "Pt", "Re", "Rh", "Ru", "Ti")

# d-block group number, used as the valence-electron count.
GROUP_NUMBER = {"Au": 11, "Co": 9, "Cu": 11, "Ir": 9, "Os": 8,
                "Pt": 10, "Re": 7, "Rh": 9, "Ru": 8, "Ti": 4}
