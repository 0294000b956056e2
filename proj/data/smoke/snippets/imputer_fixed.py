import numpy as np
import pandas as pd
from sklearn.impute import SimpleImputer
df = pd.read_csv("data.csv")

imp = SimpleImputer(missing_values=np.nan, strategy="constant", fill_value=1)
imp_array = imp.fit_transform(df)
print(imp_array[:, 1])
