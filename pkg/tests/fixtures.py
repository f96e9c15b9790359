"""Reference cue texts shared across test modules."""

from pathlib import Path

DATA_DIR = Path(__file__).parent / "data"
REFERENCE_CORPUS = DATA_DIR / "reference_cues.jsonl"

GOLF_CUE = (
    "In about 1 month, I am playing golf with my friends. We are having a great "
    "time and enjoying the company and competition. We laugh and have a great time."
)
COLLEGE_CUE = (
    "In about 3 months, I am picking my daughter up from college. I am excited she "
    "is done with school and we go to lunch at our favorite sushi restaurant and "
    "enjoy each other's company."
)
FISHING_CUE = (
    "In about 6 months, I am fishing in the bay with friends. We are on a charter "
    "boat and excited to catch some nice fish. We bet on who will catch the biggest fish."
)

REFERENCE_CUES = (
    ("1 month", GOLF_CUE),
    ("3 months", COLLEGE_CUE),
    ("6 months", FISHING_CUE),
)

HORSEBACK_CONTEXT = (
    "In about 1 month, I am horseback riding with my best friend on a farm in the "
    "fall. I am very happy."
)
HORSEBACK_EXPERT = (
    "In about a month, I am horseback riding in the beautiful fall leaves. I am "
    "with my friend on a beautiful farm. I am riding my favorite horse. The trail "
    "is covered in Orange and yellow leaves, and they are falling all around us. "
    "We are very happy and full of joy. It is nice and cool out."
)
HORSEBACK_GENERATED = (
    "In about 1 month, I am horseback riding with my best friend on a beautiful "
    "farm. The fall leaves are painting the landscape with warm colors. I am "
    "feeling incredibly happy, the joy bubbling up inside me as we ride together, "
    "laughing and chatting. The feeling of the horse moving beneath me is "
    "wonderful. It's a perfect day, and I am filled with a deep sense of "
    "contentment and joy."
)
