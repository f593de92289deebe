import os
import sys
import tempfile

# Add parent directory to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

# Keep test runs out of the user's log directory
os.environ.setdefault("CLONELAB_LOG_DIR", os.path.join(tempfile.gettempdir(), "clonelab-test-logs"))
