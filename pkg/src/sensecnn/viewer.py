"""
Local viewer for feature-detector reports.

``sensecnn analyze`` writes ``feature_detectors.html`` per word under
``<out>/analysis/<word>/``. :func:`build_page` turns either one such
directory or the whole ``analysis`` directory into a single HTML page;
:func:`main` shows it in Streamlit:

    streamlit run path/to/sensecnn/viewer.py -- runs/analyze/analysis

The module uses absolute imports because ``streamlit run`` executes it as
a script.
"""

from pathlib import Path
from typing import List, Optional, Union
import logging
import sys

from sensecnn.exceptions import SenseCnnError
from sensecnn.reports import render

logger = logging.getLogger(__name__)

PAGE_NAME = "feature_detectors.html"
INDEX_TEMPLATE = "analysis_index.html.j2"
DEFAULT_HEIGHT = 900


def report_pages(analysis_dir: Union[str, Path]) -> List[Path]:
    """
    HTML reports found in ``analysis_dir`` or its immediate subdirectories.

    Raises:
        SenseCnnError: If the directory does not exist or holds no report
    """
    root = Path(analysis_dir)
    if not root.is_dir():
        raise SenseCnnError("analysis directory not found", {"path": str(root)})
    if (root / PAGE_NAME).is_file():
        return [root / PAGE_NAME]
    pages = sorted(p / PAGE_NAME for p in root.iterdir() if (p / PAGE_NAME).is_file())
    if not pages:
        raise SenseCnnError(
            f"no {PAGE_NAME} in the directory or its subdirectories",
            {"path": str(root)},
        )
    return pages


def build_page(analysis_dir: Union[str, Path]) -> str:
    """
    One HTML page for an analysis directory.

    A single report is returned as written; several are embedded in an
    index page with one frame per word.

    Example:
        >>> html = build_page("runs/analyze/analysis")  # doctest: +SKIP
    """
    pages = report_pages(analysis_dir)
    try:
        if len(pages) == 1:
            return pages[0].read_text(encoding='utf-8')
        entries = [
            {"word": page.parent.name, "html": page.read_text(encoding='utf-8')}
            for page in pages
        ]
    except OSError as e:
        raise SenseCnnError(f"could not read report: {e.strerror or e}", {"path": str(e.filename)}) from e
    logger.debug("combined %d reports from %s", len(entries), analysis_dir)
    return render(INDEX_TEMPLATE, pages=entries)


def main(argv: Optional[List[str]] = None) -> None:
    # streamlit is only needed for the interactive view
    import streamlit as st
    import streamlit.components.v1 as components

    args = sys.argv[1:] if argv is None else argv
    st.set_page_config(page_title="sensecnn feature detectors", layout="wide")
    st.title("Feature detectors")

    default = args[0] if args else "runs/analyze/analysis"
    directory = st.text_input("Analysis directory", value=default)
    height = st.slider("Frame height", min_value=300, max_value=3000, value=DEFAULT_HEIGHT, step=100)

    try:
        html = build_page(directory)
    except SenseCnnError as e:
        st.error(str(e))
        return

    components.html(html, height=height, scrolling=True)


if __name__ == "__main__":
    main()
