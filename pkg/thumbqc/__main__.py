import sys

from thumbqc.main import main

sys.exit(main())
